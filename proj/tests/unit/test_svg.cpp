#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "qfe/svg.hpp"

using namespace qfe;

namespace {

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0, pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

// vertices in the first polyline points attribute
std::size_t polyline_vertices(const std::string& svg) {
    const std::size_t start = svg.find("<polyline points=\"");
    REQUIRE(start != std::string::npos);
    const std::size_t open = svg.find('"', start) + 1;
    const std::size_t close = svg.find('"', open);
    const std::string points = svg.substr(open, close - open);
    return count_occurrences(points, ",");
}

}  // namespace

TEST_CASE("line chart emits one polyline per series", "[svg]") {
    const std::string out =
        svg::line_chart({{"tau", {}, {1.0, 3.0, 2.0}, false}}, "title", "frame", "value");
    CHECK(out.rfind("<svg", 0) == 0);
    CHECK(out.find("</svg>") != std::string::npos);
    CHECK(count_occurrences(out, "<polyline") == 1);
    CHECK(polyline_vertices(out) == 3);
    CHECK(out.find("frame") != std::string::npos);
    CHECK(out.find("title") != std::string::npos);
}

TEST_CASE("heatmap emits one cell per entry", "[svg]") {
    Matrix m(2, 2, 0.0);
    m(0, 1) = 1.0;
    m(1, 0) = -1.0;
    const std::string out = svg::heatmap(m, {"a", "b"}, "pairs");
    CHECK(count_occurrences(out, "class=\"cell\"") == 4);
    CHECK(out.find("</svg>") != std::string::npos);
}

TEST_CASE("rendering is deterministic", "[svg]") {
    const std::vector<svg::Series> series = {{"x", {0.0, 0.5, 2.0}, {1.0, -1.0, 4.0}, false},
                                             {"y", {}, {0.0, 2.0, 1.0}, true}};
    CHECK(svg::line_chart(series, "t") == svg::line_chart(series, "t"));
    Matrix m(3, 3, 0.5);
    CHECK(svg::heatmap(m, {}) == svg::heatmap(m, {}));
}

TEST_CASE("kde chart fills the curve area", "[svg]") {
    const std::string out =
        svg::kde_chart({{"density", {0.0, 1.0, 2.0, 3.0}, {0.1, 0.5, 0.5, 0.1}, false}}, "kde");
    CHECK(count_occurrences(out, "<polygon") == 1);
    CHECK(count_occurrences(out, "<polyline") == 1);
}

TEST_CASE("empty input is rejected", "[svg]") {
    try {
        (void)svg::line_chart({});
        FAIL("expected domain error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::domain);
    }
    CHECK_THROWS_AS((void)svg::line_chart({{"empty", {}, {}, false}}), Error);
    CHECK_THROWS_AS((void)svg::heatmap(Matrix{}, {}), Error);
}

TEST_CASE("labels are escaped", "[svg]") {
    const std::string out =
        svg::line_chart({{"a<b", {}, {1.0, 2.0}, false}}, "x & y", "t", "v");
    CHECK(out.find("a&lt;b") != std::string::npos);
    CHECK(out.find("x &amp; y") != std::string::npos);
}
