#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lesiongrade/lesion.hpp"
#include "lesiongrade/symbolic.hpp"

namespace lesiongrade {

enum class SizeWord { Small, Medium, Large };

struct Clause {
    std::uint64_t count = 0;
    std::optional<SizeWord> size;  // absent for simple-mode clauses
    LesionClass lesion = LesionClass::MA;

    friend bool operator==(const Clause&, const Clause&) = default;
};

struct Explanation {
    std::string image_id;
    std::string grade_text;
    std::vector<Clause> clauses;  // nonzero entries only, vector order
    std::string rendered;
};

// The DR diagnosis of "<id>" is "<grade>" because there are 33 MA, 13 HE, 5 SE and 27 EX regions, respectively.
Explanation render_simple(const std::string& image_id, const FeatureVector& features, const GradePair& grade);
// The image <id> is classified as <grade> because 37 small MAs, ... and 3 large EXs are detected.
Explanation render_extended(const std::string& image_id, const FeatureVector& features, const GradePair& grade);
Explanation render(const std::string& image_id, const FeatureVector& features, const GradePair& grade);

struct ParsedExplanation {
    std::string image_id;
    std::string grade_text;
    FeatureVector features;
};

// Inverse of render_simple / render_extended. Throws ParseError.
ParsedExplanation parse_explanation(std::string_view rendered);

}  // namespace lesiongrade
