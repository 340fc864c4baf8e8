#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lesiongrade/lesion.hpp"

namespace lesiongrade {

// Binary raster for one lesion class of one image. Row-major, one byte per
// pixel holding 0 or 1.
class LesionMask {
public:
    LesionMask(std::size_t width, std::size_t height, LesionClass lesion_class);
    LesionMask(std::size_t width, std::size_t height, LesionClass lesion_class, std::vector<std::uint8_t> pixels);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    LesionClass lesion_class() const noexcept { return lesion_class_; }

    bool at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col] != 0; }
    void set(std::size_t row, std::size_t col, bool on) { pixels_[row * width_ + col] = on ? 1 : 0; }

    const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }
    std::size_t foreground_count() const;

    friend bool operator==(const LesionMask&, const LesionMask&) = default;

private:
    std::size_t width_;
    std::size_t height_;
    LesionClass lesion_class_;
    std::vector<std::uint8_t> pixels_;
};

enum class PgmEncoding { Ascii, Binary };  // P2, P5

// Reads a P2 or P5 PGM with maxval <= 255. Samples > 127 are foreground.
LesionMask load_mask(const std::filesystem::path& path, LesionClass lesion_class);
// Same, from an in-memory file image; `source` names the file in diagnostics.
LesionMask decode_mask(std::string_view bytes, LesionClass lesion_class, const std::string& source);

// Writes maxval 255; foreground as 255, background as 0.
void save_mask(const LesionMask& mask, const std::filesystem::path& path, PgmEncoding encoding = PgmEncoding::Binary);
std::string encode_mask(const LesionMask& mask, PgmEncoding encoding = PgmEncoding::Binary);

struct ManifestRecord {
    std::string image_id;
    // Indexed by lesion_slot(). Relative paths resolve against the manifest directory.
    std::array<std::filesystem::path, kNumLesionClasses> mask_paths;
    std::optional<GradePair> grades;
};

inline constexpr std::array<const char*, 7> kManifestColumns = {"image_id", "ma_mask",  "he_mask",  "se_mask",
                                                                "ex_mask",  "dr_grade", "dme_grade"};

std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path);
// Writes the manifest with LF line endings; paths are written as given.
void save_manifest(const std::vector<ManifestRecord>& records, const std::filesystem::path& path);

// Resolves a record's mask path relative to the manifest's directory.
std::filesystem::path resolve_mask_path(const std::filesystem::path& manifest_path, const std::filesystem::path& mask);

}  // namespace lesiongrade
