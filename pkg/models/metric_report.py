# metric_report.py - Detection metric records

from dataclasses import dataclass, field
from typing import List


@dataclass
class SampleStats:
    """Pixel and target counts of one image"""
    tp: int
    gt_pixels: int
    pred_pixels: int
    gt_targets: int
    matched_targets: int
    false_pixels: int
    total_pixels: int

    @property
    def iou(self) -> float:
        union = self.gt_pixels + self.pred_pixels - self.tp
        return 1.0 if union == 0 else self.tp / union


@dataclass
class MetricReport:
    iou: float
    niou: float
    pd: float
    fa: float
    per_sample: List[SampleStats] = field(default_factory=list)
    n_samples: int = 0
    no_targets: bool = False

    def to_row(self) -> dict:
        return {
            "iou": self.iou,
            "niou": self.niou,
            "pd": self.pd,
            "fa": self.fa,
            "n_samples": self.n_samples,
            "no_targets": self.no_targets,
        }
