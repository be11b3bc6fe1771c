#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vaet/vaet.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw vaet::IoError("cannot read config", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PT-symmetric dimer VAET simulator"};
    app.set_version_flag("--version", VAET_VERSION);

    std::string task;
    std::string config_path;
    std::string out_dir;
    int threads = 0;
    std::vector<std::string> overrides;

    app.add_option("task", task,
                   "eigen | ep | trace-line | dynamics | lindblad | sweep | cut | enhancement | period")
        ->required();
    app.add_option("-c,--config", config_path, "configuration file")->required();
    app.add_option("-o,--out", out_dir, "output directory (overrides $VAET_OUT_DIR and output.dir)");
    app.add_option("-t,--threads", threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_option("--override", overrides, "section.key=value, applied after the file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(vaet::ErrorCategory::parse);
    }

    try {
        if (!vaet::parse_task(task)) throw vaet::ParseError("unknown task '" + task + "'", 0, "task");
        if (threads > 0) overrides.push_back("sweep.threads=" + std::to_string(threads));
        overrides.push_back("task=" + task);
        const vaet::RunConfig config = vaet::parse_config(read_file(config_path), overrides);
        const auto dir = vaet::resolve_output_dir(out_dir, config);
        const auto report = vaet::run(config, dir, std::cerr);
        return report.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return vaet::exit_code_of(e);
    }
}
