#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "critedge/spectrum.hpp"

namespace critedge {

enum class Model { ginibre, iid };

Model parse_model(const std::string& name);
std::string model_name(Model m);

/// Entries with E|X_ij|^2 = 1/N and E X_ij^2 = 0. Bit-identical for equal (model, n, seed).
Eigen::MatrixXcd sample_matrix(Model model, std::int64_t n, std::uint64_t seed);

/// A_c = <|D|^-2>^{1/2} D with D = diag(+-1 +- ic), each sign pattern n/4 times.
DeformationSpectrum ac_family(std::int64_t n, double c);

/// (1 + c^2/2)^{1/2} [[-1, c], [0, 1]] repeated n/2 times.
Eigen::MatrixXcd nonnormal_example1(std::int64_t n, double c);
/// (1 + c^2/2)^{1/2} ([[-1, c], [0, -1]] + [[1, c], [0, 1]]) repeated n/4 times.
Eigen::MatrixXcd nonnormal_example2(std::int64_t n, double c);

struct CriticalSampleOptions {
    double frak_c = 4.0;
    double chi_max = 1.0;
    bool hermitian = false;
};

/// Random normal A with <|A|^-2> = 1, <A^-2 A*^-1> = 0 and ||A||, ||A^-1|| <= frak_c.
DeformationSpectrum random_critical_spectrum(std::int64_t n, std::uint64_t seed,
                                             const CriticalSampleOptions& opt = {});

}  // namespace critedge
