// Writes the bundled Gaussian fixture: x.csv (20 x 5), y.csv and beta0.csv
// with two nonzero coefficients.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "ewa/csv.hpp"
#include "ewa/experiments.hpp"

namespace fs = std::filesystem;
using namespace ewa;

namespace {

void write_rows(const fs::path& path, const Matrix& M) {
    std::ofstream os(path, std::ios::binary);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) os << (j ? "," : "") << csv::format(M(i, j));
        os << '\n';
    }
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path dir = argc > 1 ? argv[1] : "fixtures";
    const std::uint64_t seed = 20240601;
    const long n = 20, p = 5;
    const int p0 = 2;
    fs::create_directories(dir);
    Rng design_rng = make_rng(seed, "fixture-design");
    const Matrix X = generate_design(n, p, {}, design_rng);
    Rng truth_rng = make_rng(seed, "fixture-truth");
    TruthSpec spec;
    spec.amplitude = 3.0;
    const Truth truth = generate_truth(X, p0, spec, truth_rng);
    const Family fam = Family::gaussian();
    Rng y_rng = make_rng(seed, "fixture-response");
    Vector Y(n);
    for (long i = 0; i < n; ++i) Y[i] = sample_response(fam, truth.theta0[i], y_rng);
    write_rows(dir / "x.csv", X);
    write_rows(dir / "y.csv", Y);
    write_rows(dir / "beta0.csv", *truth.beta0);
    std::printf("wrote %s/{x,y,beta0}.csv\n", dir.string().c_str());
    return 0;
}
