#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cowgraph/graph.hpp"
#include "cowgraph/volume.hpp"

namespace cow {

struct VariantReport {
    // anterior
    bool l_a1 = false, acom = false, third_a2 = false, r_a1 = false;
    // posterior
    bool l_pcom = false, l_p1 = false, r_p1 = false, r_pcom = false;
    // fetal-type PCA
    bool fetal_l = false, fetal_r = false;
    // fenestrations
    bool fen_l_a1 = false, fen_acom = false, fen_r_a1 = false, fen_l_p1 = false, fen_r_p1 = false;

    std::vector<std::string> diagnostics;

    /// All binary slots in a fixed order as ("group/name", value).
    std::vector<std::pair<std::string, bool>> slots() const;

    bool operator==(const VariantReport& o) const { return slots() == o.slots(); }
};

struct VariantOptions {
    int min_voxels = 30;          ///< presence threshold at the reference grid
    double reference_mm = 0.25;   ///< grid spacing the voxel threshold refers to
    double fetal_factor = 1.05;
    double fetal_percentile = 25.0;
};

/// Minimum labeled volume (mm^3) for a communicating segment to count as present.
double presence_volume_mm3(const VariantOptions& opt = {});

/// Sets the 8 presence flags. Acom/Pcom/3rd-A2 from label volume; A1/P1 from their connection nodes.
void classify_segment_presence(const Mask& labels, const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                               VariantReport& r, const VariantOptions& opt = {});

/// Fetal rule comparing the 25th percentile CE radius of Pcom and P1 on one side.
bool classify_fetal_pca(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes, Side side,
                        const VariantReport& presence, std::vector<std::string>* diagnostics = nullptr,
                        const VariantOptions& opt = {});

/// Fetal rule on precomputed radius samples (either may be empty when the segment is absent).
bool fetal_rule(const std::vector<double>& pcom_radii, const std::vector<double>& p1_radii, bool pcom_present,
                const VariantOptions& opt = {});

/// Cycle rank of the subgraph formed by the edges of one label.
int label_cycle_rank(const CenterlineGraph& g, Label l);

/// Sets the 5 fenestration flags from single-label cycles.
void detect_fenestrations(const CenterlineGraph& g, VariantReport& r);

/// Full classification.
VariantReport classify_variants(const Mask& labels, const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                                const VariantOptions& opt = {});

}  // namespace cow
