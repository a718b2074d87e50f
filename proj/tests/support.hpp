#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "crmort/dataset.hpp"
#include "crmort/model.hpp"
#include "crmort/simulate.hpp"

namespace testing {

// Smooth parameters for A age groups and K causes, death rates rising with age.
inline crmort::ModelParams reference_params(int age_groups, int causes) {
    crmort::ModelParams p = crmort::ModelParams::zeros(crmort::ModelDims{age_groups, causes});
    for (std::size_t c = 0; c < p.dims.n_cells(); ++c) {
        const auto cell = crmort::cell_at(p.dims, c);
        const double a = cell.age_group;
        const double male = cell.gender == crmort::Gender::male ? 0.3 : 0.0;
        p.death_prob[c].alpha = -9.0 + 0.7 * a + male;
        p.death_prob[c].beta = -0.01;
        for (int k = 1; k <= causes; ++k) {
            p.u(c, k) = 0.3 * k - 0.2 * a / age_groups;
            p.v(c, k) = 0.004 * (k % 3 - 1);
        }
    }
    for (int k = 1; k <= causes; ++k) p.sigma2(k) = 0.005 + 0.01 * (k % 3);
    return p;
}

inline crmort::MortalityDataset synthetic_dataset(const crmort::ModelParams& p, int years, std::int64_t m,
                                                  std::uint64_t seed) {
    auto spec = crmort::SimulationSpec::constant_population(p, 1987, years, m, seed);
    return crmort::simulate_dataset(spec).data;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("crmort_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline int run_cli(const std::string& args) {
    const std::string cmd = std::string(CRMORT_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace testing
