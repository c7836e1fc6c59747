#pragma once

#include "qmad/csv.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace qmad::test {

inline std::filesystem::path data_dir() { return QMAD_TEST_DATA; }
inline std::filesystem::path reference_dir() { return data_dir() / "reference"; }

inline const std::vector<std::string>& reference_names()
{
    static const std::vector<std::string> names{"astronaut", "camera", "coffee", "chelsea", "rocket"};
    return names;
}

/// Rows of a frozen oracle CSV, fields as strings.
inline std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path)
{
    std::ifstream in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(csv::split(line));
    return rows;
}

inline double to_double(const std::string& s) { return std::stod(s); }

inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("qmad_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::vector<double> normal_draws(std::size_t n, double mean, double sd, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(mean, sd);
    std::vector<double> out(n);
    for (auto& x : out) x = d(rng);
    return out;
}

} // namespace qmad::test
