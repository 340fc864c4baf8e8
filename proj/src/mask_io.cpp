#include "lesiongrade/mask_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "lesiongrade/csv.hpp"
#include "lesiongrade/error.hpp"

namespace lesiongrade {

LesionMask::LesionMask(std::size_t width, std::size_t height, LesionClass lesion_class)
    : LesionMask(width, height, lesion_class, std::vector<std::uint8_t>(width * height, 0)) {}

LesionMask::LesionMask(std::size_t width, std::size_t height, LesionClass lesion_class,
                       std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), lesion_class_(lesion_class), pixels_(std::move(pixels)) {
    if (width_ == 0 || height_ == 0) throw InputError("lesion mask must have nonzero width and height");
    if (pixels_.size() != width_ * height_) throw InputError("lesion mask pixel count does not match its dimensions");
    for (auto& p : pixels_) p = p ? 1 : 0;
}

std::size_t LesionMask::foreground_count() const {
    return static_cast<std::size_t>(std::count(pixels_.begin(), pixels_.end(), std::uint8_t{1}));
}

namespace {

constexpr std::uint32_t kForegroundAbove = 127;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

// Cursor over the file bytes that records offsets for diagnostics.
class PgmReader {
public:
    PgmReader(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ >= bytes_.size(); }

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (is_space(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
            } else {
                break;
            }
        }
    }

    // Reads an unsigned decimal token. Returns false at end of input.
    bool number(std::uint64_t& value, std::size_t& token_offset, MaskFormatError::Kind on_bad,
                const char* what) {
        skip_space_and_comments();
        token_offset = pos_;
        if (at_end()) return false;
        const char* first = bytes_.data() + pos_;
        const char* last = first;
        while (last < bytes_.data() + bytes_.size() && !is_space(*last) && *last != '#') ++last;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last)
            throw MaskFormatError(on_bad, source_, token_offset,
                                  std::string("expected ") + what + ", found '" + std::string(first, last) + "'");
        pos_ += static_cast<std::size_t>(last - first);
        return true;
    }

    std::string_view rest() const { return bytes_.substr(pos_); }
    char peek() const { return bytes_[pos_]; }
    void advance(std::size_t n) { pos_ += n; }
    const std::string& source() const { return source_; }

private:
    std::string_view bytes_;
    const std::string& source_;
    std::size_t pos_ = 0;
};

}  // namespace

LesionMask decode_mask(std::string_view bytes, LesionClass lesion_class, const std::string& source) {
    using Kind = MaskFormatError::Kind;
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5'))
        throw MaskFormatError(Kind::MalformedHeader, source, 0, "expected magic P2 or P5");
    const bool binary = bytes[1] == '5';
    PgmReader reader(bytes, source);
    reader.advance(2);
    if (!reader.at_end() && !is_space(reader.peek()) && reader.peek() != '#')
        throw MaskFormatError(Kind::MalformedHeader, source, 2, "expected whitespace after magic");

    std::uint64_t fields[3];
    const char* names[3] = {"width", "height", "maxval"};
    for (int i = 0; i < 3; ++i) {
        std::size_t off = 0;
        if (!reader.number(fields[i], off, Kind::MalformedHeader, names[i]))
            throw MaskFormatError(Kind::MalformedHeader, source, off, std::string("header ends before ") + names[i]);
        if (i < 2 && fields[i] == 0) throw MaskFormatError(Kind::ZeroDimension, source, off, names[i] + std::string(" is 0"));
        if (i == 2 && fields[i] > 255)
            throw MaskFormatError(Kind::MaxvalTooLarge, source, off, "maxval " + std::to_string(fields[i]));
        if (i == 2 && fields[i] == 0) throw MaskFormatError(Kind::MalformedHeader, source, off, "maxval is 0");
    }
    const std::uint64_t width = fields[0], height = fields[1], maxval = fields[2];
    constexpr std::uint64_t kMaxPixels = std::uint64_t{1} << 34;
    if (width > kMaxPixels || height > kMaxPixels || width * height > kMaxPixels)
        throw MaskFormatError(Kind::MalformedHeader, source, reader.pos(), "dimensions too large");
    const std::size_t count = static_cast<std::size_t>(width * height);

    std::vector<std::uint8_t> pixels(count);
    if (binary) {
        if (reader.at_end() || !is_space(reader.peek()))
            throw MaskFormatError(Kind::MalformedHeader, source, reader.pos(), "expected single whitespace before raster");
        reader.advance(1);
        const std::string_view raster = reader.rest();
        if (raster.size() < count)
            throw MaskFormatError(Kind::TruncatedPayload, source, bytes.size(),
                                  "expected " + std::to_string(count) + " raster bytes, found " +
                                      std::to_string(raster.size()));
        for (std::size_t i = 0; i < count; ++i) {
            const auto v = static_cast<std::uint8_t>(raster[i]);
            if (v > maxval)
                throw MaskFormatError(Kind::BadSample, source, reader.pos() + i,
                                      "sample " + std::to_string(v) + " exceeds maxval");
            pixels[i] = v > kForegroundAbove ? 1 : 0;
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t v = 0;
            std::size_t off = 0;
            if (!reader.number(v, off, Kind::BadSample, "sample"))
                throw MaskFormatError(Kind::TruncatedPayload, source, off,
                                      "expected " + std::to_string(count) + " samples, found " + std::to_string(i));
            if (v > maxval)
                throw MaskFormatError(Kind::BadSample, source, off, "sample " + std::to_string(v) + " exceeds maxval");
            pixels[i] = v > kForegroundAbove ? 1 : 0;
        }
    }
    return LesionMask(static_cast<std::size_t>(width), static_cast<std::size_t>(height), lesion_class,
                      std::move(pixels));
}

LesionMask load_mask(const std::filesystem::path& path, LesionClass lesion_class) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MaskFormatError(MaskFormatError::Kind::Io, path.string(), 0, "cannot open file");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_mask(bytes, lesion_class, path.string());
}

std::string encode_mask(const LesionMask& mask, PgmEncoding encoding) {
    std::string out = encoding == PgmEncoding::Binary ? "P5\n" : "P2\n";
    out += std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
    const auto& px = mask.pixels();
    if (encoding == PgmEncoding::Binary) {
        out.reserve(out.size() + px.size());
        for (auto p : px) out += static_cast<char>(p ? 255 : 0);
    } else {
        for (std::size_t r = 0; r < mask.height(); ++r) {
            for (std::size_t c = 0; c < mask.width(); ++c) {
                if (c) out += ' ';
                out += mask.at(r, c) ? "255" : "0";
            }
            out += '\n';
        }
    }
    return out;
}

void save_mask(const LesionMask& mask, const std::filesystem::path& path, PgmEncoding encoding) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(path.string() + ": cannot open for writing");
    const std::string bytes = encode_mask(mask, encoding);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

namespace {

std::optional<int> parse_grade(const std::string& cell, int max_grade, const std::string& where, const char* column) {
    if (cell.empty()) return std::nullopt;
    int v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw InputError(where + ": " + column + " '" + cell + "' is not an integer");
    if (v < 0 || v > max_grade)
        throw InputError(where + ": " + column + " " + cell + " out of range 0-" + std::to_string(max_grade));
    return v;
}

}  // namespace

std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path) {
    const csv::Table table = csv::read_file(path.string());
    std::array<std::size_t, kManifestColumns.size()> col{};
    for (std::size_t i = 0; i < kManifestColumns.size(); ++i) {
        col[i] = table.column(kManifestColumns[i]);
        if (col[i] == std::string::npos)
            throw InputError(path.string() + ": missing column '" + kManifestColumns[i] + "'");
    }
    std::vector<ManifestRecord> records;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = path.string() + ":" + std::to_string(table.lines[r]);
        ManifestRecord rec;
        rec.image_id = row[col[0]];
        if (rec.image_id.empty()) throw InputError(where + ": empty image_id");
        if (!seen.insert(rec.image_id).second) throw InputError(where + ": duplicate image_id '" + rec.image_id + "'");
        for (std::size_t k = 0; k < kNumLesionClasses; ++k) {
            const std::string& p = row[col[1 + k]];
            if (p.empty()) throw InputError(where + ": empty " + kManifestColumns[1 + k]);
            rec.mask_paths[k] = p;
        }
        const auto dr = parse_grade(row[col[5]], kNumDrGrades - 1, where, "dr_grade");
        const auto dme = parse_grade(row[col[6]], kNumDmeGrades - 1, where, "dme_grade");
        if (dr.has_value() != dme.has_value())
            throw InputError(where + ": dr_grade and dme_grade must be both present or both empty");
        if (dr) rec.grades = GradePair{*dr, *dme};
        records.push_back(std::move(rec));
    }
    return records;
}

void save_manifest(const std::vector<ManifestRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(path.string() + ": cannot open for writing");
    csv::write_row(out, {kManifestColumns.begin(), kManifestColumns.end()});
    for (const auto& rec : records) {
        std::vector<std::string> fields{rec.image_id};
        for (const auto& p : rec.mask_paths) fields.push_back(p.generic_string());
        fields.push_back(rec.grades ? std::to_string(rec.grades->dr) : "");
        fields.push_back(rec.grades ? std::to_string(rec.grades->dme) : "");
        csv::write_row(out, fields);
    }
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::filesystem::path resolve_mask_path(const std::filesystem::path& manifest_path, const std::filesystem::path& mask) {
    if (mask.is_absolute()) return mask;
    return manifest_path.parent_path() / mask;
}

}  // namespace lesiongrade
