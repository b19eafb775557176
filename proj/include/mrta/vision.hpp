// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mrta/manual.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mrta
{

/// Pixel coordinates as emitted by the vision model, passed through unscaled.
struct BoundingBox
{
    int x_left = 0;
    int y_top = 0;
    int x_right = 0;
    int y_bottom = 0;

    [[nodiscard]] bool valid() const noexcept
    {
        return x_left >= 0 && y_top >= 0 && x_left < x_right && y_top < y_bottom;
    }
    bool operator==(const BoundingBox&) const = default;
};

struct DetectionResult
{
    std::string object_label;
    BoundingBox box;
    std::string raw_output;

    /// "<label> <x_left> <y_top> <x_right> <y_bottom>"
    [[nodiscard]] std::string canonical() const;
};

struct MatchVerdict
{
    bool matches = false;
    std::string rationale;
};

/// Slot for a vision-language model. Implementations throw Error with a backend code on failure and never
/// return an empty answer in place of an error.
class VisionBackend
{
  public:
    virtual ~VisionBackend() = default;
    virtual std::string infer(const std::string& query, const std::string& image_ref) = 0;
};

/// Scripted vision model: the first rule whose query_contains is a substring of the query and whose image_ref
/// equals the request's (an empty or "*" image_ref matches any) supplies the answer.
class MockVisionBackend final: public VisionBackend
{
  public:
    struct Rule
    {
        std::string query_contains;
        std::string image_ref;
        std::string output;
        // When set, the rule fails with BackendError instead (e.g. "timeout").
        std::optional<std::string> error;
    };

    explicit MockVisionBackend(std::vector<Rule> rules);

    static MockVisionBackend from_json(const nlohmann::json& rules);
    static MockVisionBackend from_file(const std::filesystem::path& path);

    std::string infer(const std::string& query, const std::string& image_ref) override;

    [[nodiscard]] const std::vector<Rule>& rules() const noexcept { return _rules; }

  private:
    std::vector<Rule> _rules;
};

inline constexpr std::string_view detection_token = "[detection]";
inline constexpr std::string_view state_check_token = "[vqa]";

/// "[detection] " followed by the step's first instruction sentence, whitespace-normalized.
[[nodiscard]] std::string build_detection_query(const StepInstruction& step);

/// State-matching prompt carrying the reference step's full instruction text.
[[nodiscard]] std::string build_state_query(const StepInstruction& reference_step);

/// Extracts the first "<label> <int> <int> <int> <int>" on a line. The label is the run of words before the
/// integers, stopping at a clause delimiter (. : ; ! ? ,), a line break or another integer. When more than four
/// integers are adjacent, the last four form the box.
/// Throws Error(NoDetectionFound) or Error(DegenerateBox).
[[nodiscard]] DetectionResult parse_detection_output(std::string_view raw);

[[nodiscard]] DetectionResult detect_object(const StepInstruction& step, const std::string& image_ref, VisionBackend& backend);

/// Leading yes/no (case-insensitive) becomes the verdict; the rest is the rationale.
/// Throws Error(UnparseableVerdict).
[[nodiscard]] MatchVerdict parse_verdict(std::string_view raw);

[[nodiscard]] MatchVerdict check_assembly_state(const std::string& image_ref,
                                                const StepInstruction& reference_step,
                                                VisionBackend& backend);

[[nodiscard]] nlohmann::json to_json(const DetectionResult& result);
[[nodiscard]] nlohmann::json to_json(const MatchVerdict& verdict);

} // namespace mrta
