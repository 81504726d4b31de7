#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cow {

using Label = std::uint8_t;

namespace label {
inline constexpr Label Background = 0;
inline constexpr Label BA = 1;
inline constexpr Label RPCA = 2;
inline constexpr Label LPCA = 3;
inline constexpr Label RICA = 4;
inline constexpr Label RMCA = 5;
inline constexpr Label LICA = 6;
inline constexpr Label LMCA = 7;
inline constexpr Label RPcom = 8;
inline constexpr Label LPcom = 9;
inline constexpr Label Acom = 10;
inline constexpr Label RACA = 11;
inline constexpr Label LACA = 12;
inline constexpr Label ThirdA2 = 15;
}  // namespace label

enum class Side { Right, Left };

/// The 13 vessel codes in ascending order.
std::span<const Label> all_labels();

bool is_valid_label(int code);
bool is_vessel_label(int code);

/// "BA", "R-PCA", ..., "3rd-A2"; "background" for 0.
std::string_view label_name(Label code);
/// Inverse of label_name; returns Background for unknown names.
Label label_from_name(std::string_view name);

/// Vessel type without side: "BA", "PCA", "ICA", "MCA", "Pcom", "Acom", "ACA", "3rd-A2".
std::string_view vessel_type(Label code);

/// Per-side codes.
Label pca(Side s);
Label ica(Side s);
Label mca(Side s);
Label pcom(Side s);
Label aca(Side s);

/// Whether two distinct labels may share a junction or boundary in a CoW graph.
bool labels_adjacent(Label a, Label b);

/// Allowed node names for a segment (label); closed vocabulary.
const std::vector<std::string>& node_vocabulary(Label segment);
bool in_vocabulary(Label segment, std::string_view name);

}  // namespace cow
