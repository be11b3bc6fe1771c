#pragma once

#include "vaet/errors.hpp"
#include "vaet/linalg.hpp"
#include "vaet/model.hpp"
#include "vaet/spectral.hpp"
#include "vaet/dynamics.hpp"
#include "vaet/sweeps.hpp"
#include "vaet/config.hpp"
#include "vaet/csv.hpp"
#include "vaet/runner.hpp"
