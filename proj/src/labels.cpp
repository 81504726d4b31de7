#include "cowgraph/labels.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <utility>

namespace cow {

namespace {

constexpr std::array<Label, 13> kLabels{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 15};

struct LabelInfo {
    Label code;
    std::string_view name;
    std::string_view type;
};

constexpr std::array<LabelInfo, 13> kInfo{{
    {label::BA, "BA", "BA"},
    {label::RPCA, "R-PCA", "PCA"},
    {label::LPCA, "L-PCA", "PCA"},
    {label::RICA, "R-ICA", "ICA"},
    {label::RMCA, "R-MCA", "MCA"},
    {label::LICA, "L-ICA", "ICA"},
    {label::LMCA, "L-MCA", "MCA"},
    {label::RPcom, "R-Pcom", "Pcom"},
    {label::LPcom, "L-Pcom", "Pcom"},
    {label::Acom, "Acom", "Acom"},
    {label::RACA, "R-ACA", "ACA"},
    {label::LACA, "L-ACA", "ACA"},
    {label::ThirdA2, "3rd-A2", "3rd-A2"},
}};

const LabelInfo* find_info(Label code)
{
    for (const auto& i : kInfo)
        if (i.code == code) return &i;
    return nullptr;
}

using Pair = std::pair<Label, Label>;

constexpr std::array<Pair, 13> kAdjacent{{
    {label::BA, label::RPCA},
    {label::BA, label::LPCA},
    {label::RICA, label::RMCA},
    {label::RICA, label::RACA},
    {label::RICA, label::RPcom},
    {label::LICA, label::LMCA},
    {label::LICA, label::LACA},
    {label::LICA, label::LPcom},
    {label::RPCA, label::RPcom},
    {label::LPCA, label::LPcom},
    {label::Acom, label::RACA},
    {label::Acom, label::LACA},
    {label::Acom, label::ThirdA2},
}};

}  // namespace

std::span<const Label> all_labels() { return kLabels; }

bool is_vessel_label(int code)
{
    return std::find(kLabels.begin(), kLabels.end(), code) != kLabels.end();
}

bool is_valid_label(int code) { return code == 0 || is_vessel_label(code); }

std::string_view label_name(Label code)
{
    if (code == label::Background) return "background";
    const LabelInfo* i = find_info(code);
    return i ? i->name : "unknown";
}

Label label_from_name(std::string_view name)
{
    for (const auto& i : kInfo)
        if (i.name == name) return i.code;
    return label::Background;
}

std::string_view vessel_type(Label code)
{
    const LabelInfo* i = find_info(code);
    return i ? i->type : "";
}

Label pca(Side s) { return s == Side::Right ? label::RPCA : label::LPCA; }
Label ica(Side s) { return s == Side::Right ? label::RICA : label::LICA; }
Label mca(Side s) { return s == Side::Right ? label::RMCA : label::LMCA; }
Label pcom(Side s) { return s == Side::Right ? label::RPcom : label::LPcom; }
Label aca(Side s) { return s == Side::Right ? label::RACA : label::LACA; }

bool labels_adjacent(Label a, Label b)
{
    for (const auto& [x, y] : kAdjacent)
        if ((x == a && y == b) || (x == b && y == a)) return true;
    return false;
}

const std::vector<std::string>& node_vocabulary(Label segment)
{
    static const std::map<std::string_view, std::vector<std::string>> by_type{
        {"BA", {"BA start", "BA bifurcation", "R-PCA boundary", "L-PCA boundary"}},
        {"PCA", {"BA boundary", "Pcom bifurcation", "Pcom boundary", "PCA end"}},
        {"ICA",
         {"ICA start", "Pcom bifurcation", "Pcom boundary", "ICA bifurcation", "ACA boundary", "MCA boundary"}},
        {"MCA", {"ICA boundary", "MCA end"}},
        {"Pcom", {"ICA boundary", "PCA boundary"}},
        {"Acom", {"R-ACA boundary", "L-ACA boundary", "3rd-A2 bifurcation", "3rd-A2 boundary"}},
        {"ACA", {"ICA boundary", "Acom bifurcation", "Acom boundary", "ACA end"}},
        {"3rd-A2", {"Acom boundary", "3rd-A2 end"}},
    };
    static const std::vector<std::string> empty;
    const auto it = by_type.find(vessel_type(segment));
    return it == by_type.end() ? empty : it->second;
}

bool in_vocabulary(Label segment, std::string_view name)
{
    const auto& v = node_vocabulary(segment);
    return std::find(v.begin(), v.end(), name) != v.end();
}

}  // namespace cow
