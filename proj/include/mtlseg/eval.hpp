#pragma once

#include <cstdint>

#include "mtlseg/tensor.hpp"

namespace mtlseg {

// Per-pixel confusion counts; positive class = building. Counts add, so
// per-sample results can be summed before scoring.
struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

struct MetricsReport {
    ConfusionCounts counts;
    double iou = 1.0;
    double f1 = 1.0;
};

// 1 where p >= t. t must lie strictly inside (0,1).
Tensor threshold(const Tensor& prob_map, float t = 0.5f);

ConfusionCounts confusion(const Tensor& pred, const Tensor& gt);

// iou = tp/(tp+fp+fn), f1 = 2tp/(2tp+fp+fn); both are 1 when no positives
// exist anywhere (perfect agreement on absence).
MetricsReport metrics(const ConfusionCounts& counts);

// Binary morphology with a square structuring element of side 2r+1. Pixels
// outside the image count as 0, so erosion eats the image border.
Tensor erode(const Tensor& mask, int se_radius);
Tensor dilate(const Tensor& mask, int se_radius);

// dilate(erode(mask, r), r): removes speckles smaller than the element.
Tensor opening(const Tensor& mask, int se_radius);

// seg AND NOT bnd (predicted boundary pixels carve separations between
// touching footprints), then opening. Never adds pixels to seg.
Tensor fuse_postprocess(const Tensor& seg_mask, const Tensor& bnd_mask, int se_radius = 1);

}  // namespace mtlseg
