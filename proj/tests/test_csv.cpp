#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "physres/common.hpp"
#include "physres/csv.hpp"

using namespace physres;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

}  // namespace

TEST_CASE("read_csv parses header and numeric rows") {
    const auto path = write_temp("physres_csv_ok.csv", "a,b\n1,2\n3.5,-4e2\n");
    const CsvTable t = read_csv(path);
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][0] == doctest::Approx(3.5));
    CHECK(t.rows[1][1] == doctest::Approx(-400.0));
}

TEST_CASE("read_csv rejects non-numeric cells with the row index") {
    const auto path = write_temp("physres_csv_bad.csv", "a,b\n1,2\n1,2\n1,2\n1,2\nx,2\n");
    try {
        read_csv(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 5") != std::string::npos);
    }
}

TEST_CASE("read_csv treats NaN as non-numeric") {
    const auto path = write_temp("physres_csv_nan.csv", "a,b\n1,2\n1,NaN\n");
    CHECK_THROWS_AS(read_csv(path), DataError);
}

TEST_CASE("format_double round-trips") {
    for (const double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.6789, 0.0}) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
}
