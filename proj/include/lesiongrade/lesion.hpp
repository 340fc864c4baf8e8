#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lesiongrade {

// The four segmented lesion classes, in feature-vector order.
enum class LesionClass : std::uint8_t { MA = 1, HE = 2, SE = 3, EX = 4 };

inline constexpr std::array<LesionClass, 4> kLesionClasses = {LesionClass::MA, LesionClass::HE, LesionClass::SE,
                                                              LesionClass::EX};
inline constexpr std::size_t kNumLesionClasses = 4;

constexpr int lesion_index(LesionClass c) { return static_cast<int>(c); }
// Zero-based slot used for arrays indexed by class.
constexpr std::size_t lesion_slot(LesionClass c) { return static_cast<std::size_t>(c) - 1; }

std::string_view lesion_name(LesionClass c);
std::optional<LesionClass> lesion_from_index(int index);
std::optional<LesionClass> lesion_from_name(std::string_view name);

inline constexpr int kNumDrGrades = 5;
inline constexpr int kNumDmeGrades = 3;

// (DR, DME) label pair. DR: 0 no DR .. 4 PDR. DME: 0 no EX, 1 EX outside macula centre, 2 within.
struct GradePair {
    int dr = 0;
    int dme = 0;

    friend bool operator==(const GradePair&, const GradePair&) = default;
};

bool valid_grades(const GradePair& g);
// Throws InputError when out of range.
GradePair checked_grades(int dr, int dme);

std::string_view dr_grade_name(int dr);
std::optional<int> dr_grade_from_name(std::string_view name);

}  // namespace lesiongrade
