#include "lesiongrade/lesion.hpp"

#include "lesiongrade/error.hpp"

namespace lesiongrade {

namespace {

constexpr std::array<std::string_view, 4> kLesionNames = {"MA", "HE", "SE", "EX"};
constexpr std::array<std::string_view, kNumDrGrades> kDrNames = {"no DR", "mild NPDR", "moderate NPDR", "severe NPDR",
                                                                 "PDR"};

}  // namespace

std::string_view lesion_name(LesionClass c) { return kLesionNames[lesion_slot(c)]; }

std::optional<LesionClass> lesion_from_index(int index) {
    if (index < 1 || index > 4) return std::nullopt;
    return static_cast<LesionClass>(index);
}

std::optional<LesionClass> lesion_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kLesionNames.size(); ++i)
        if (kLesionNames[i] == name) return kLesionClasses[i];
    return std::nullopt;
}

bool valid_grades(const GradePair& g) {
    return g.dr >= 0 && g.dr < kNumDrGrades && g.dme >= 0 && g.dme < kNumDmeGrades;
}

GradePair checked_grades(int dr, int dme) {
    if (dr < 0 || dr >= kNumDrGrades) throw InputError("DR grade " + std::to_string(dr) + " outside 0-4");
    if (dme < 0 || dme >= kNumDmeGrades) throw InputError("DME grade " + std::to_string(dme) + " outside 0-2");
    return {dr, dme};
}

std::string_view dr_grade_name(int dr) {
    if (dr < 0 || dr >= kNumDrGrades) throw InputError("DR grade " + std::to_string(dr) + " outside 0-4");
    return kDrNames[static_cast<std::size_t>(dr)];
}

std::optional<int> dr_grade_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kDrNames.size(); ++i)
        if (kDrNames[i] == name) return static_cast<int>(i);
    return std::nullopt;
}

namespace {

const char* kind_label(MaskFormatError::Kind kind) {
    switch (kind) {
        case MaskFormatError::Kind::MalformedHeader: return "malformed PGM header";
        case MaskFormatError::Kind::TruncatedPayload: return "truncated PGM payload";
        case MaskFormatError::Kind::MaxvalTooLarge: return "PGM maxval above 255";
        case MaskFormatError::Kind::ZeroDimension: return "PGM with zero dimension";
        case MaskFormatError::Kind::BadSample: return "invalid PGM sample";
        case MaskFormatError::Kind::Io: return "cannot read mask";
    }
    return "PGM error";
}

}  // namespace

MaskFormatError::MaskFormatError(Kind kind, const std::string& path, std::size_t offset, const std::string& detail)
    : InputError(path + ": " + kind_label(kind) + " at byte " + std::to_string(offset) +
                 (detail.empty() ? std::string() : ": " + detail)),
      kind_(kind),
      offset_(offset) {}

}  // namespace lesiongrade
