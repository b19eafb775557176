// SPDX-License-Identifier: Apache-2.0
#include "fuzz.hpp"
#include "support.hpp"

#include <mrta/error.hpp>
#include <mrta/vision.hpp>

#include <doctest.h>

using namespace mrta;

namespace
{
ErrorCode detection_error(std::string_view raw)
{
    try
    {
        (void)parse_detection_output(raw);
    }
    catch (const Error& e)
    {
        return e.code();
    }
    FAIL("expected a parse failure for: " << raw);
    return ErrorCode::BackendError;
}
} // namespace

TEST_CASE("detection parser accepts common output shapes")
{
    struct Case
    {
        std::string_view raw;
        std::string_view label;
        BoundingBox box;
    };
    std::vector<Case> const cases {
        {"red brick 120 80 260 190", "red brick", {120, 80, 260, 190}},
        {"Sure! The answer is: red brick 1 2 3 4.", "red brick", {1, 2, 3, 4}},
        {"Found it. axle: [10, 20, 30, 40]", "axle", {10, 20, 30, 40}},
        {"**wheel** (5 6 7 8) and more", "wheel", {5, 6, 7, 8}},
        {"no box here\ngrey plate 0 0 9 9", "grey plate", {0, 0, 9, 9}},
        {"tile 7 1 2 3 4", "tile", {1, 2, 3, 4}},
        {"Sure! turntable: 301 188 402 276", "turntable", {301, 188, 402, 276}},
    };
    for (auto const& c: cases)
    {
        auto const result = parse_detection_output(c.raw);
        CHECK(result.object_label == c.label);
        CHECK(result.box == c.box);
        CHECK(result.raw_output == c.raw);
    }
}

TEST_CASE("detection parser failures")
{
    CHECK(detection_error("") == ErrorCode::NoDetectionFound);
    CHECK(detection_error("I cannot see the model clearly.") == ErrorCode::NoDetectionFound);
    CHECK(detection_error("1 2 3 4") == ErrorCode::NoDetectionFound);
    CHECK(detection_error("brick 1 2 3") == ErrorCode::NoDetectionFound);
    CHECK(detection_error("brick. 1 2 3 4") == ErrorCode::NoDetectionFound);
    CHECK(detection_error("brick 1 2\n3 4") == ErrorCode::NoDetectionFound);
    CHECK(detection_error("brick 50 50 10 10") == ErrorCode::DegenerateBox);
    CHECK(detection_error("brick -5 0 10 10") == ErrorCode::DegenerateBox);
    CHECK(detection_error("brick 0 0 99999999999999999999 10") == ErrorCode::DegenerateBox);
}

TEST_CASE("canonical detection text round trips")
{
    DetectionResult d {"red brick", {1, 2, 3, 4}, ""};
    CHECK(d.canonical() == "red brick 1 2 3 4");
    auto const back = parse_detection_output(d.canonical());
    CHECK(back.object_label == d.object_label);
    CHECK(back.box == d.box);
    CHECK(to_json(d)["box"] == nlohmann::json::array({1, 2, 3, 4}));
}

TEST_CASE("noise-wrapped detections parse to the embedded values")
{
    Rng rng(11);
    for (int i = 0; i < 300; ++i)
    {
        auto const d = testing::noisy_detection(rng);
        auto const result = parse_detection_output(d.text);
        CHECK_MESSAGE(result.object_label == d.label, d.text);
        CHECK_MESSAGE(result.box == d.box, d.text);
    }
}

TEST_CASE("integer-free noise is never accepted")
{
    Rng rng(12);
    for (int i = 0; i < 300; ++i)
        CHECK(detection_error(testing::integer_free_noise(rng)) == ErrorCode::NoDetectionFound);
}

TEST_CASE("verdict parser")
{
    auto yes = parse_verdict("Yes, the assembly matches.");
    CHECK(yes.matches);
    CHECK(yes.rationale == "the assembly matches.");
    auto no = parse_verdict("  **NO**: the cab is missing");
    CHECK_FALSE(no.matches);
    CHECK(no.rationale == "the cab is missing");
    CHECK(parse_verdict("yes").rationale.empty());
    for (auto const* bad: {"", "Maybe", "Yesterday it was fine", "Nothing matches", "It is yes"})
        CHECK_THROWS_AS((void)parse_verdict(bad), Error);
    CHECK(to_json(yes)["matches"] == true);
}

TEST_CASE("queries carry the task token and step text")
{
    StepInstruction step;
    step.index = 4;
    step.instructions = {"Attach  the\nroof.", "Press down."};
    CHECK(build_detection_query(step) == "[detection] Attach the roof.");
    auto const state = build_state_query(step);
    CHECK(state.starts_with("[vqa]"));
    CHECK(state.find("step 4?") != std::string::npos);
    CHECK(state.find("Attach the roof. Press down.") != std::string::npos);
    step.instructions.clear();
    CHECK_THROWS_AS((void)build_detection_query(step), Error);
}

TEST_CASE("mock backend matches rules in order")
{
    auto mock = MockVisionBackend::from_json(nlohmann::json::parse(R"([
        {"query_contains": "[detection]", "image_ref": "img://a", "output": "a 1 2 3 4"},
        {"query_contains": "[detection]", "image_ref": "*", "output": "b 1 2 3 4"},
        {"query_contains": "[vqa]", "error": "timeout"}
    ])"));
    CHECK(mock.infer("[detection] x", "img://a") == "a 1 2 3 4");
    CHECK(mock.infer("[detection] x", "img://b") == "b 1 2 3 4");
    CHECK_THROWS_AS(mock.infer("[vqa] x", "img://a"), Error);
    CHECK_THROWS_AS(mock.infer("other", "img://a"), Error);

    StepInstruction step;
    step.index = 1;
    step.instructions = {"Do it."};
    auto const d = detect_object(step, "img://a", mock);
    CHECK(d.object_label == "a");

    CHECK_THROWS_AS(MockVisionBackend::from_json(nlohmann::json::object()), Error);
    CHECK_THROWS_AS(MockVisionBackend::from_json(nlohmann::json::parse(R"([{"query_contains": "x"}])")), Error);
    CHECK_THROWS_AS(MockVisionBackend::from_file("/nonexistent.json"), Error);
}

TEST_CASE("shipped vision fixture loads")
{
    auto mock = MockVisionBackend::from_file(testing::data_dir() / "backends" / "vision.mock.json");
    StepInstruction step;
    step.index = 1;
    step.instructions = {"Anything."};
    CHECK(check_assembly_state("img://x", step, mock).matches);
    CHECK(detect_object(step, "img://mini-racer/step-01.png", mock).object_label == "black chassis plate");
}
