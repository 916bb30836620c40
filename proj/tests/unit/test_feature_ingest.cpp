#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>

#include "qfe/feature.hpp"
#include "qfe/feature_csv.hpp"
#include "qfe/preprocess.hpp"
#include "qfe/rng.hpp"
#include "support/synthetic.hpp"

using namespace qfe;

namespace {

const std::string kMinimalHeader = "frame,timestamp,confidence,success,AU01_r,AU04_r,AU28_c";

std::string minimal_csv() {
    return kMinimalHeader +
           "\n"
           "0,0.0,0.98,1,1.5,0.5,0\n"
           "1,0.2,0.97,1,2.5,1.0,1\n";
}

}  // namespace

TEST_CASE("parse maps rows to frames", "[feature_ingest]") {
    const FeatureSequence seq = parse_feature_csv(minimal_csv(), 5.0);
    REQUIRE(seq.frames.size() == 2);
    REQUIRE(seq.fps == 5.0);
    CHECK(seq.frames[0].frame_index == 0);
    CHECK(seq.frames[1].timestamp == 0.2);
    CHECK(seq.frames[0].au_intensities.at(1) == 1.5);
    CHECK(seq.frames[1].au_intensities.at(4) == 1.0);
    CHECK(seq.frames[0].landmarks_2d.empty());
    CHECK_FALSE(seq.frames[0].head_pose.has_value());
}

TEST_CASE("a UTF-8 byte-order mark is tolerated", "[feature_ingest]") {
    const FeatureSequence seq = parse_feature_csv("\xEF\xBB\xBF" + minimal_csv(), 5.0);
    CHECK(seq.frames.size() == 2);
}

TEST_CASE("presence-only AU channels map to 5*c", "[feature_ingest]") {
    const FeatureSequence seq = parse_feature_csv(minimal_csv(), 5.0);
    CHECK(seq.frames[0].au_intensities.at(28) == 0.0);
    CHECK(seq.frames[1].au_intensities.at(28) == 5.0);
}

TEST_CASE("parse errors name the offender", "[feature_ingest]") {
    SECTION("missing confidence column") {
        const std::string csv = "frame,timestamp,success,AU01_r\n0,0.0,1,1.0\n";
        try {
            (void)parse_feature_csv(csv, 5.0);
            FAIL("expected format error");
        } catch (const Error& e) {
            CHECK(e.code() == errc::format);
            CHECK(std::string(e.what()).find("confidence") != std::string::npos);
        }
    }
    SECTION("no AU intensity columns") {
        const std::string csv = "frame,timestamp,confidence,success\n0,0.0,0.9,1\n";
        try {
            (void)parse_feature_csv(csv, 5.0);
            FAIL("expected format error");
        } catch (const Error& e) {
            CHECK(e.code() == errc::format);
        }
    }
    SECTION("non-numeric cell carries row and column") {
        const std::string csv = kMinimalHeader + "\n0,0.0,abc,1,1.0,1.0,0\n";
        try {
            (void)parse_feature_csv(csv, 5.0);
            FAIL("expected parse error");
        } catch (const Error& e) {
            CHECK(e.code() == errc::parse);
            CHECK(std::string(e.what()).find("confidence") != std::string::npos);
            CHECK(std::string(e.what()).find("row 1") != std::string::npos);
        }
    }
    SECTION("empty table") {
        try {
            (void)parse_feature_csv(kMinimalHeader + "\n", 5.0);
            FAIL("expected empty-input error");
        } catch (const Error& e) {
            CHECK(e.code() == errc::empty_input);
        }
    }
    SECTION("partial landmark block") {
        const std::string csv =
            "frame,timestamp,confidence,success,AU01_r,x_0\n0,0.0,0.9,1,1.0,3.0\n";
        CHECK_THROWS_AS((void)parse_feature_csv(csv, 5.0), Error);
    }
    SECTION("non-increasing timestamps") {
        const std::string csv = kMinimalHeader +
                                "\n0,0.5,0.9,1,1,1,0\n"
                                "1,0.5,0.9,1,1,1,0\n";
        try {
            (void)parse_feature_csv(csv, 5.0);
            FAIL("expected data error");
        } catch (const Error& e) {
            CHECK(e.code() == errc::data);
        }
    }
}

TEST_CASE("preprocess interpolates short gaps", "[feature_ingest]") {
    FeatureSequence seq;
    seq.fps = 5.0;
    for (int i = 0; i < 3; ++i) {
        FeatureFrame f;
        f.frame_index = i;
        f.timestamp = i * 0.2;
        f.confidence = i == 1 ? 0.3 : 0.95;
        f.success = true;
        f.au_intensities[4] = i == 0 ? 1.0 : (i == 1 ? 9.9 : 3.0);
        f.landmarks_2d.assign(kLandmarkCount, Point2{i == 1 ? -100.0 : 10.0 * i, 0.0});
        seq.frames.push_back(f);
    }
    const FeatureSequence out = preprocess(seq, {.confidence_threshold = 0.8, .max_gap = 1});
    REQUIRE(out.frames.size() == 3);
    CHECK(out.frames[1].au_intensities.at(4) == Catch::Approx(2.0));   // midpoint of 1 and 3
    CHECK(out.frames[1].landmarks_2d[0].x == Catch::Approx(10.0));    // midpoint of 0 and 20
    CHECK(out.frames[1].success);
}

TEST_CASE("preprocess clamps AU intensities", "[feature_ingest]") {
    FeatureSequence seq;
    seq.fps = 5.0;
    FeatureFrame f;
    f.frame_index = 0;
    f.confidence = 1.0;
    f.au_intensities[4] = 7.2;
    f.au_intensities[6] = -0.3;
    seq.frames.push_back(f);
    const FeatureSequence out = preprocess(seq, {.clamp = true});
    CHECK(out.frames[0].au_intensities.at(4) == 5.0);
    CHECK(out.frames[0].au_intensities.at(6) == 0.0);
}

TEST_CASE("preprocess is a no-op on fully valid input", "[feature_ingest]") {
    const FeatureSequence seq = synth::make_sequence(40, 123);
    const FeatureSequence out = preprocess(seq, {});
    CHECK(serialize_feature_csv(out) == serialize_feature_csv(seq));
}

TEST_CASE("preprocess drops long or edge gaps", "[feature_ingest]") {
    FeatureSequence seq;
    seq.fps = 5.0;
    for (int i = 0; i < 8; ++i) {
        FeatureFrame f;
        f.frame_index = i;
        f.timestamp = i * 0.2;
        f.confidence = (i >= 2 && i <= 4) || i == 7 ? 0.1 : 0.95;
        f.au_intensities[1] = 1.0;
        seq.frames.push_back(f);
    }
    // run of 3 invalid (max_gap 2) dropped; trailing invalid frame dropped
    const FeatureSequence out = preprocess(seq, {.confidence_threshold = 0.8, .max_gap = 2});
    REQUIRE(out.frames.size() == 4);
    CHECK(out.frames[0].frame_index == 0);
    CHECK(out.frames[1].frame_index == 1);
    CHECK(out.frames[2].frame_index == 5);
    CHECK(out.frames[3].frame_index == 6);
}

TEST_CASE("preprocess rejects fully invalid input", "[feature_ingest]") {
    FeatureSequence seq;
    seq.fps = 5.0;
    FeatureFrame f;
    f.confidence = 0.1;
    f.au_intensities[1] = 1.0;
    seq.frames.push_back(f);
    try {
        (void)preprocess(seq, {});
        FAIL("expected unusable-sequence error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::unusable_sequence);
    }
}

TEST_CASE("preprocess keeps AU intensities in range (property)", "[feature_ingest]") {
    SplitMix64 rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        FeatureSequence seq;
        seq.fps = 5.0;
        const int n = 20 + static_cast<int>(rng.index_below(30));
        for (int i = 0; i < n; ++i) {
            FeatureFrame f;
            f.frame_index = i;
            f.timestamp = i * 0.2;
            f.confidence = rng.next_double();
            f.au_intensities[1] = rng.uniform(-2.0, 9.0);
            f.au_intensities[4] = rng.uniform(-2.0, 9.0);
            seq.frames.push_back(f);
        }
        seq.frames[0].confidence = 1.0;  // keep the sequence usable
        const FeatureSequence out = preprocess(seq, {.confidence_threshold = 0.5, .max_gap = 5});
        for (const auto& fr : out.frames)
            for (const auto& [id, v] : fr.au_intensities) {
                CHECK(v >= 0.0);
                CHECK(v <= 5.0);
            }
    }
}

TEST_CASE("minmax_scale endpoints and degenerate columns", "[feature_ingest]") {
    ModalityMatrix m;
    m.modality = Modality::lm2d;
    m.values = Matrix::from_rows({{2.0, 3.0, 0.0}, {4.0, 3.0, 1.0}, {6.0, 3.0, 0.5}});
    const ModalityMatrix s = minmax_scale(m);
    REQUIRE(s.scaled);
    CHECK(s.values(0, 0) == 0.0);
    CHECK(s.values(1, 0) == 0.5);
    CHECK(s.values(2, 0) == 1.0);
    CHECK(s.values(0, 1) == 0.0);  // constant column maps to zero
    CHECK(s.values(1, 1) == 0.0);
    CHECK(s.values(2, 1) == 0.0);
    CHECK(s.values(1, 2) == 1.0);  // already [0,1] stays put
}

TEST_CASE("minmax_scale is idempotent and bounded (property)", "[feature_ingest]") {
    SplitMix64 rng(7);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t rows = 2 + rng.index_below(20);
        const std::size_t cols = 1 + rng.index_below(6);
        ModalityMatrix m;
        m.values = Matrix(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) m.values(i, j) = rng.uniform(-50.0, 50.0);
        const ModalityMatrix once = minmax_scale(m);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
                CHECK(once.values(i, j) >= 0.0);
                CHECK(once.values(i, j) <= 1.0);
            }
        ModalityMatrix again = once;
        again.scaled = false;
        CHECK(minmax_scale(again).values == once.values);
    }
}

TEST_CASE("minmax_scale rejects non-finite input", "[feature_ingest]") {
    ModalityMatrix m;
    m.values = Matrix::from_rows({{1.0}, {std::nan("")}});
    try {
        (void)minmax_scale(m);
        FAIL("expected data error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::data);
    }
}

TEST_CASE("select_au_subset follows the category map", "[feature_ingest]") {
    FeatureFrame f;
    for (int id : default_au_category_map().at("overall"))
        f.au_intensities[id] = static_cast<double>(id) / 10.0;

    SECTION("pain uses the pain-expressiveness set") {
        const auto v = select_au_subset(f, "pain");
        REQUIRE(v == std::vector<double>{0.4, 0.6, 0.9, 1.0, 2.5});  // AUs 4,6,9,10,25
    }
    SECTION("happiness") {
        const auto v = select_au_subset(f, "happiness");
        REQUIRE(v == std::vector<double>{0.6, 0.7, 1.2, 2.5, 2.6});  // AUs 6,7,12,25,26
    }
    SECTION("unknown category") {
        try {
            (void)select_au_subset(f, "joyfulness");
            FAIL("expected lookup error");
        } catch (const Error& e) {
            CHECK(e.code() == errc::lookup);
        }
    }
    SECTION("missing AU names the culprit") {
        f.au_intensities.erase(9);
        try {
            (void)select_au_subset(f, "pain");
            FAIL("expected missing-feature error");
        } catch (const Error& e) {
            CHECK(e.code() == errc::missing_feature);
            CHECK(std::string(e.what()).find("AU9") != std::string::npos);
        }
    }
}

TEST_CASE("overall category is the 18-AU set", "[feature_ingest]") {
    const auto& ids = default_au_category_map().at("overall");
    const std::set<int> got(ids.begin(), ids.end());
    const std::set<int> want = {1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 28, 45};
    CHECK(got == want);
    CHECK(ids.size() == 18);
}

TEST_CASE("every mapped AU id is described", "[feature_ingest]") {
    for (const auto& [cat, ids] : default_au_category_map().all())
        for (int id : ids) CHECK(described_au_ids().count(id) == 1);
}

TEST_CASE("the default map carries every required category", "[feature_ingest]") {
    for (const char* cat :
         {"overall", "pain", "amusement", "anger", "confusion", "disgust", "embarrassment",
          "fear", "happiness", "interest", "sadness", "surprise", "sympathy"})
        CHECK(default_au_category_map().contains(cat));
}

TEST_CASE("parse -> serialize -> parse round-trips bit-exactly", "[feature_ingest]") {
    const FeatureSequence seq = synth::make_sequence(25, 4242, 5.0, true);
    const std::string first = serialize_feature_csv(seq);
    const FeatureSequence reparsed = parse_feature_csv(first, seq.fps, seq.subject_id);
    REQUIRE(reparsed.frames.size() == seq.frames.size());
    const std::string second = serialize_feature_csv(reparsed);
    CHECK(first == second);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        CHECK(reparsed.frames[i].timestamp == seq.frames[i].timestamp);
        CHECK(reparsed.frames[i].au_intensities == seq.frames[i].au_intensities);
    }
}
