#include "hhsplit/schemes.hpp"

#include <array>
#include <utility>

namespace hhsplit {

namespace {

constexpr std::array<std::pair<SchemeKind, std::string_view>, 8> kSchemeNames{{
    {SchemeKind::lt1, "lt1"},
    {SchemeKind::lt2, "lt2"},
    {SchemeKind::strang, "strang"},
    {SchemeKind::em, "em"},
    {SchemeKind::tem, "tem"},
    {SchemeKind::dtem, "dtem"},
    {SchemeKind::trem, "trem"},
    {SchemeKind::dtrem, "dtrem"},
}};

}  // namespace

std::string_view scheme_name(SchemeKind k) {
    for (const auto& [kind, name] : kSchemeNames)
        if (kind == k) return name;
    return "unknown";
}

SchemeKind parse_scheme(std::string_view name) {
    for (const auto& [kind, n] : kSchemeNames)
        if (n == name) return kind;
    throw std::invalid_argument("unknown scheme '" + std::string(name) +
                                "' (expected lt1, lt2, strang, em, tem, dtem, trem or dtrem)");
}

std::string_view chi_name(ChiRealization c) {
    return c == ChiRealization::scaled_increment ? "increment" : "weighted";
}

ChiRealization parse_chi(std::string_view name) {
    if (name == "increment") return ChiRealization::scaled_increment;
    if (name == "weighted") return ChiRealization::weighted_path;
    throw std::invalid_argument("unknown Ito-integral realization '" + std::string(name) +
                                "' (expected increment or weighted)");
}

}  // namespace hhsplit
