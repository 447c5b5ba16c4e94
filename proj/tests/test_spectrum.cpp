#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "critedge/errors.hpp"
#include "critedge/spectrum.hpp"

using namespace critedge;

TEST_CASE("weighted trace uses m_i / N") {
    DeformationSpectrum s({cd(1, 0), cd(0, 2)}, {3, 1});
    CHECK(s.n == 4);
    double t = s.trace([](cd z) { return std::norm(z); });
    CHECK(t == doctest::Approx(0.75 * 1 + 0.25 * 4));
}

TEST_CASE("validate rejects bad multiplicities") {
    DeformationSpectrum s({cd(1, 0)}, {2});
    s.n = 3;
    CHECK_THROWS_AS(s.validate(), DimensionMismatch);
    DeformationSpectrum z({cd(0, 0), cd(1, 0)}, {1, 1});
    CHECK_THROWS_AS(z.require_nonzero(), ZeroEigenvalue);
}

TEST_CASE("collapse merges exact duplicates and keeps order") {
    auto s = DeformationSpectrum::from_values({cd(1, 0), cd(2, 0), cd(1, 0)});
    auto c = s.collapsed();
    REQUIRE(c.size() == 2);
    CHECK(c.eigenvalues[0] == cd(1, 0));
    CHECK(c.multiplicities[0] == 2);
    CHECK(c.n == 3);
    CHECK(c.expanded().size() == 3);
}

TEST_CASE("json round trip") {
    DeformationSpectrum s({cd(1, -0.5), cd(-2, 0.25)}, {2, 6});
    nlohmann::json j = s;
    auto back = j.get<DeformationSpectrum>();
    CHECK(back.n == 8);
    CHECK(back.eigenvalues == s.eigenvalues);
    CHECK(back.multiplicities == s.multiplicities);
    CHECK(nlohmann::json(back).dump() == j.dump());

    const char* path = "test_spectrum_roundtrip.json";
    write_spectrum(path, s);
    CHECK(nlohmann::json(read_spectrum(path)).dump() == j.dump());
    std::remove(path);

    nlohmann::json bad = {{"n", 3}, {"eigenvalues", {{1.0, 0.0}}}, {"multiplicities", {2}}};
    CHECK_THROWS_AS(bad.get<DeformationSpectrum>(), DimensionMismatch);
}
