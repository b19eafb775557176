// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mrta/assembly.hpp>
#include <mrta/error.hpp>
#include <mrta/rng.hpp>
#include <mrta/vision.hpp>

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mrta::testing
{

struct EmbeddedDetection
{
    std::string text;
    std::string label;
    BoundingBox box;
};

inline std::string pick(Rng& rng, std::span<const std::string_view> items)
{
    return std::string(items[rng.below(items.size())]);
}

inline std::string noise_words(Rng& rng, std::size_t max_words)
{
    static constexpr std::array<std::string_view, 16> words {
        "sure", "the", "object", "appears", "in", "frame", "located", "near", "center", "I", "see", "a",
        "clearly", "visible", "piece", "here",
    };
    std::string out;
    auto const n = 1 + rng.below(max_words);
    for (std::size_t i = 0; i < n; ++i)
    {
        if (!out.empty())
            out.push_back(' ');
        out += pick(rng, words);
    }
    return out;
}

/// A valid "<label> <box>" embedded in integer-free chatter that ends the surrounding clauses.
inline EmbeddedDetection noisy_detection(Rng& rng)
{
    static constexpr std::array<std::string_view, 12> label_words {
        "red", "brick", "axle", "wheel", "grey", "plate", "tile", "black", "windscreen", "crane", "hook", "cab",
    };
    EmbeddedDetection d;
    auto const label_len = 1 + rng.below(3);
    for (std::size_t i = 0; i < label_len; ++i)
    {
        if (!d.label.empty())
            d.label.push_back(' ');
        d.label += pick(rng, label_words);
    }
    auto const x = static_cast<int>(rng.below(1500));
    auto const y = static_cast<int>(rng.below(1500));
    d.box = BoundingBox {x, y, x + 1 + static_cast<int>(rng.below(500)), y + 1 + static_cast<int>(rng.below(500))};

    auto const xl = std::to_string(d.box.x_left), yt = std::to_string(d.box.y_top);
    auto const xr = std::to_string(d.box.x_right), yb = std::to_string(d.box.y_bottom);
    std::string box;
    switch (rng.below(4))
    {
        case 0: box = xl + " " + yt + " " + xr + " " + yb; break;
        case 1: box = "[" + xl + ", " + yt + ", " + xr + ", " + yb + "]"; break;
        case 2: box = "(" + xl + " " + yt + " " + xr + " " + yb + ")"; break;
        default: box = xl + "  " + yt + "\t" + xr + " " + yb; break;
    }

    std::string label = d.label;
    switch (rng.below(4))
    {
        case 0: break;
        case 1: label = "**" + label + "**"; break;
        case 2: label += ":"; break;
        default: label = "\"" + label + "\""; break;
    }

    std::string prefix;
    switch (rng.below(6))
    {
        case 0: break;
        case 1: prefix = noise_words(rng, 6) + ". "; break;
        case 2: prefix = noise_words(rng, 6) + ": "; break;
        case 3: prefix = noise_words(rng, 6) + "\n"; break;
        case 4: prefix = noise_words(rng, 4) + "! " + noise_words(rng, 4) + ", "; break;
        default: prefix = "\n\n" + noise_words(rng, 3) + "?\n  "; break;
    }
    std::string suffix;
    switch (rng.below(5))
    {
        case 0: break;
        case 1: suffix = "."; break;
        case 2: suffix = ". " + noise_words(rng, 8) + "."; break;
        case 3: suffix = "\n" + noise_words(rng, 8); break;
        default: suffix = " ; " + noise_words(rng, 5) + "!"; break;
    }
    d.text = prefix + label + " " + box + suffix;
    return d;
}

/// Printable chatter with punctuation, brackets, signs and line breaks but no digits.
inline std::string integer_free_noise(Rng& rng)
{
    static constexpr std::string_view alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ      .,;:!?-+()[]{}<>\"'*`_/\\\n\t";
    std::string out;
    auto const len = rng.below(200);
    for (std::size_t i = 0; i < len; ++i)
        out.push_back(alphabet[rng.below(alphabet.size())]);
    if (rng.below(3) == 0)
        out += " box - - - - label one two three four";
    return out;
}

/// Deterministic vision backend that exercises detection, parse failures and both verdicts.
inline MockVisionBackend fuzz_vision_backend()
{
    return MockVisionBackend({
        {"[detection] Step one", "", "grey axle 10 20 110 220", std::nullopt},
        {"[detection] Step two", "", "I cannot tell.", std::nullopt},
        {"[detection] Step three", "", "broken 50 50 10 10", std::nullopt},
        {"[detection]", "", "", std::string("timeout")},
        {"step 2?", "", "Maybe, hard to say.", std::nullopt},
        {"step 3?", "", "No, the cab is missing.", std::nullopt},
        {"[vqa]", "", "Yes, it matches.", std::nullopt},
    });
}

inline std::shared_ptr<const InstructionManual> fuzz_manual(std::size_t steps)
{
    static constexpr std::array<std::string_view, 4> names {"one", "two", "three", "four"};
    auto manual = std::make_shared<InstructionManual>();
    manual->id = "fuzz";
    manual->title = "Fuzz";
    manual->summary = "A model for fuzzing.";
    for (std::size_t i = 1; i <= steps; ++i)
    {
        StepInstruction step;
        step.index = static_cast<int>(i);
        step.instructions = {"Step " + std::string(names[(i - 1) % names.size()]) + " of the model."};
        if (i % 3 != 0)
            step.piece_ids = {"piece-" + std::to_string(i), "piece-common"};
        manual->steps.push_back(std::move(step));
    }
    return manual;
}

inline ToolCall random_call(Rng& rng, int total_steps)
{
    auto const tool = static_cast<Tool>(rng.below(tool_count));
    ToolCall call {tool, nlohmann::json::object()};
    if (tool == Tool::GoToStep)
    {
        switch (rng.below(6))
        {
            case 0: call.args["step"] = "two"; break;
            case 1: call.args["step"] = 1.5; break;
            default: call.args["step"] = rng.between(-1, total_steps + 2); break;
        }
    }
    else if (tool == Tool::Rotate)
    {
        static constexpr std::array<std::string_view, 6> dirs {"Up", "Down", "Left", "Right", "None", "Sideways"};
        call.args["direction"] = std::string(dirs[rng.below(dirs.size())]);
    }
    return call;
}

} // namespace mrta::testing
