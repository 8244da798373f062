// Regenerates the bundled synthetic monthly dataset under data/fixtures/:
// 76 subjects observed at 12 monthly time points, predictor and response in
// long-format CSV with month indices 1..12 as the time column. Values come
// from the study generator with a fixed seed, so the files are reproducible.

#include <cstdio>
#include <filesystem>
#include <string>

#include "ffq/io.hpp"
#include "ffq/simulate.hpp"

int main(int argc, char** argv) {
    const std::string out_dir = argc > 1 ? argv[1] : "data/fixtures";
    std::filesystem::create_directories(out_dir);

    ffq::SimConfig cfg;
    cfg.n = 76;
    cfg.n_t = 12;
    cfg.noise_nu1 = 0.1;
    cfg.noise_nu2 = 12.0;
    cfg.noise_nu3 = 0.2;
    cfg.seed = 761202;
    const auto data = ffq::generate_dataset(cfg, 0);

    const auto write_var = [&](const Eigen::MatrixXd& values, const std::string& name) {
        std::string csv = "subject_id,time,value\n";
        for (int i = 0; i < cfg.n; ++i) {
            char id[16];
            std::snprintf(id, sizeof(id), "s%02d", i + 1);
            for (int j = 0; j < cfg.n_t; ++j)
                csv += std::string(id) + "," + std::to_string(j + 1) + "," +
                       ffq::io::format_double(values(i, j)) + "\n";
        }
        ffq::io::write_text(out_dir + "/" + name, csv);
    };
    write_var(data.x, "monthly_predictor.csv");
    write_var(data.y, "monthly_response.csv");
    std::printf("wrote %s/monthly_predictor.csv and monthly_response.csv (%d subjects, %d points)\n",
                out_dir.c_str(), cfg.n, cfg.n_t);
    return 0;
}
