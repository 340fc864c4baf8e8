#include "lesiongrade/explain.hpp"

#include <charconv>

#include "lesiongrade/error.hpp"

namespace lesiongrade {

namespace {

constexpr std::string_view kSimplePrefix = "The DR diagnosis of \"";
constexpr std::string_view kExtendedPrefix = "The image ";
constexpr std::string_view kNoLesions = "no lesion regions are detected.";

constexpr std::array<std::string_view, 3> kSizeWords = {"small", "medium", "large"};

std::string_view size_word(SizeWord s) { return kSizeWords[static_cast<std::size_t>(s)]; }

// "a", "a and b", "a, b and c".
std::string join_clauses(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += i + 1 == parts.size() ? " and " : ", ";
        out += parts[i];
    }
    return out;
}

void require_mode(const FeatureVector& f, FeatureMode mode) {
    if (f.mode != mode)
        throw InputError("expected " + std::string(feature_mode_name(mode)) + " features, got " +
                         std::string(feature_mode_name(f.mode)));
}

}  // namespace

Explanation render_simple(const std::string& image_id, const FeatureVector& features, const GradePair& grade) {
    require_mode(features, FeatureMode::Simple);
    Explanation e{image_id, std::string(dr_grade_name(grade.dr)), {}, {}};
    std::vector<std::string> parts;
    for (std::size_t k = 0; k < kNumLesionClasses; ++k) {
        const auto n = features.values[k];
        if (n == 0) continue;
        e.clauses.push_back({n, std::nullopt, kLesionClasses[k]});
        parts.push_back(std::to_string(n) + " " + std::string(lesion_name(kLesionClasses[k])));
    }
    e.rendered = std::string(kSimplePrefix) + image_id + "\" is \"" + e.grade_text + "\" because ";
    if (parts.empty())
        e.rendered += kNoLesions;
    else
        e.rendered += "there are " + join_clauses(parts) + " regions, respectively.";
    return e;
}

Explanation render_extended(const std::string& image_id, const FeatureVector& features, const GradePair& grade) {
    require_mode(features, FeatureMode::Extended);
    Explanation e{image_id, std::string(dr_grade_name(grade.dr)), {}, {}};
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < features.values.size(); ++i) {
        const auto n = features.values[i];
        if (n == 0) continue;
        const LesionClass lesion = kLesionClasses[i / 3];
        const auto size = static_cast<SizeWord>(i % 3);
        e.clauses.push_back({n, size, lesion});
        parts.push_back(std::to_string(n) + " " + std::string(size_word(size)) + " " +
                        std::string(lesion_name(lesion)) + (n == 1 ? "" : "s"));
    }
    e.rendered = std::string(kExtendedPrefix) + image_id + " is classified as " + e.grade_text + " because ";
    if (parts.empty())
        e.rendered += kNoLesions;
    else
        e.rendered += join_clauses(parts) + " are detected.";
    return e;
}

Explanation render(const std::string& image_id, const FeatureVector& features, const GradePair& grade) {
    return features.mode == FeatureMode::Simple ? render_simple(image_id, features, grade)
                                                : render_extended(image_id, features, grade);
}

namespace {

[[noreturn]] void fail(std::string_view text, const std::string& why) {
    std::string shown(text.substr(0, 80));
    if (text.size() > 80) shown += "...";
    throw ParseError("cannot parse explanation '" + shown + "': " + why);
}

// Splits "a, b and c" (also "a, b, and c") into its items.
std::vector<std::string_view> split_clauses(std::string_view list, std::string_view text) {
    std::vector<std::string_view> items;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = list.find(", ", start);
        if (comma == std::string_view::npos) break;
        items.push_back(list.substr(start, comma - start));
        start = comma + 2;
    }
    std::string_view last = list.substr(start);
    if (last.starts_with("and ")) {
        if (items.empty()) fail(text, "dangling 'and'");
        last.remove_prefix(4);
    } else if (const std::size_t and_pos = last.find(" and "); and_pos != std::string_view::npos) {
        items.push_back(last.substr(0, and_pos));
        last = last.substr(and_pos + 5);
    } else if (!items.empty()) {
        fail(text, "missing 'and' before the final clause");
    }
    items.push_back(last);
    return items;
}

std::uint64_t parse_count(std::string_view token, std::string_view text) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc() || ptr != token.data() + token.size())
        fail(text, "bad count '" + std::string(token) + "'");
    if (v == 0) fail(text, "zero-count clause");
    return v;
}

std::vector<std::string_view> words(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t sp = s.find(' ', start);
        out.push_back(s.substr(start, sp == std::string_view::npos ? std::string_view::npos : sp - start));
        if (sp == std::string_view::npos) break;
        start = sp + 1;
    }
    return out;
}

// Stores `count` at `slot`; slots must appear in strictly increasing order.
void place(std::vector<std::uint64_t>& values, std::size_t slot, std::uint64_t count, std::ptrdiff_t& last_slot,
           std::string_view text) {
    if (static_cast<std::ptrdiff_t>(slot) <= last_slot) fail(text, "clauses out of order or repeated");
    values[slot] = count;
    last_slot = static_cast<std::ptrdiff_t>(slot);
}

ParsedExplanation parse_simple(std::string_view text) {
    std::string_view body = text.substr(kSimplePrefix.size());
    const std::size_t id_end = body.rfind("\" is \"");
    if (id_end == std::string_view::npos) fail(text, "missing '\" is \"'");
    ParsedExplanation out;
    out.image_id = std::string(body.substr(0, id_end));
    body.remove_prefix(id_end + 6);
    const std::size_t grade_end = body.find("\" because ");
    if (grade_end == std::string_view::npos) fail(text, "missing '\" because '");
    out.grade_text = std::string(body.substr(0, grade_end));
    if (!dr_grade_from_name(out.grade_text)) fail(text, "unknown grade '" + out.grade_text + "'");
    body.remove_prefix(grade_end + 10);

    std::vector<std::uint64_t> values(4, 0);
    if (body != kNoLesions) {
        constexpr std::string_view kHead = "there are ";
        constexpr std::string_view kTail = " regions, respectively.";
        if (!body.starts_with(kHead) || !body.ends_with(kTail)) fail(text, "unexpected clause list");
        body = body.substr(kHead.size(), body.size() - kHead.size() - kTail.size());
        std::ptrdiff_t last = -1;
        for (std::string_view item : split_clauses(body, text)) {
            const auto w = words(item);
            if (w.size() != 2) fail(text, "clause '" + std::string(item) + "' is not '<count> <lesion>'");
            const auto lesion = lesion_from_name(w[1]);
            if (!lesion) fail(text, "unknown lesion '" + std::string(w[1]) + "'");
            place(values, lesion_slot(*lesion), parse_count(w[0], text), last, text);
        }
    }
    out.features = FeatureVector(FeatureMode::Simple, std::move(values));
    return out;
}

ParsedExplanation parse_extended(std::string_view text) {
    std::string_view body = text.substr(kExtendedPrefix.size());
    constexpr std::string_view kIs = " is classified as ";
    const std::size_t id_end = body.rfind(kIs);
    if (id_end == std::string_view::npos) fail(text, "missing 'is classified as'");
    ParsedExplanation out;
    out.image_id = std::string(body.substr(0, id_end));
    body.remove_prefix(id_end + kIs.size());
    const std::size_t grade_end = body.find(" because ");
    if (grade_end == std::string_view::npos) fail(text, "missing 'because'");
    out.grade_text = std::string(body.substr(0, grade_end));
    if (!dr_grade_from_name(out.grade_text)) fail(text, "unknown grade '" + out.grade_text + "'");
    body.remove_prefix(grade_end + 9);

    std::vector<std::uint64_t> values(12, 0);
    if (body != kNoLesions) {
        constexpr std::string_view kTail = " are detected.";
        if (!body.ends_with(kTail)) fail(text, "missing 'are detected.'");
        body.remove_suffix(kTail.size());
        std::ptrdiff_t last = -1;
        for (std::string_view item : split_clauses(body, text)) {
            const auto w = words(item);
            if (w.size() != 3) fail(text, "clause '" + std::string(item) + "' is not '<count> <size> <lesion>'");
            const std::uint64_t count = parse_count(w[0], text);
            std::size_t size = kSizeWords.size();
            for (std::size_t s = 0; s < kSizeWords.size(); ++s)
                if (kSizeWords[s] == w[1]) size = s;
            if (size == kSizeWords.size()) fail(text, "unknown size word '" + std::string(w[1]) + "'");
            std::string_view name = w[2];
            if (name.size() == 3 && name.back() == 's') name.remove_suffix(1);
            const auto lesion = lesion_from_name(name);
            if (!lesion) fail(text, "unknown lesion '" + std::string(w[2]) + "'");
            place(values, lesion_slot(*lesion) * 3 + size, count, last, text);
        }
    }
    out.features = FeatureVector(FeatureMode::Extended, std::move(values));
    return out;
}

}  // namespace

ParsedExplanation parse_explanation(std::string_view rendered) {
    if (rendered.starts_with(kSimplePrefix)) return parse_simple(rendered);
    if (rendered.starts_with(kExtendedPrefix)) return parse_extended(rendered);
    fail(rendered, "unrecognized sentence template");
}

}  // namespace lesiongrade
