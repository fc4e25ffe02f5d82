use super::{PenaltyConfig, PenaltyKind};

/// Closed interval `[lo, hi]`; a singleton when `lo == hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SubgradientInterval {
    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn symmetric(radius: f64) -> Self {
        Self {
            lo: -radius,
            hi: radius,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

impl std::ops::Add for SubgradientInterval {
    type Output = Self;

    fn add(self, other: Self) -> Self {
        Self {
            lo: self.lo + other.lo,
            hi: self.hi + other.hi,
        }
    }
}

/// Position of a leaf weight relative to its chain neighbours: `w_j - w_left`
/// and `w_j - w_right`, absent at the ends of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NeighborContext {
    pub left_diff: Option<f64>,
    pub right_diff: Option<f64>,
}

impl NeighborContext {
    pub fn of(block: &[f64], j: usize) -> Self {
        let w = block[j];
        Self {
            left_diff: (j > 0).then(|| w - block[j - 1]),
            right_diff: block.get(j + 1).map(|&r| w - r),
        }
    }

    pub fn is_boundary(&self) -> bool {
        self.left_diff.is_none() || self.right_diff.is_none()
    }
}

/// Per-coordinate subdifferential of `h + g` at `w_j`, with each fusion term
/// contributing its own interval independently of its neighbour's multiplier.
pub fn subgradient_interval(
    w_j: f64,
    ctx: NeighborContext,
    cfg: &PenaltyConfig,
) -> SubgradientInterval {
    let lambda = cfg.lambda_s;
    let sparsity = if w_j == 0.0 {
        SubgradientInterval::symmetric(lambda)
    } else {
        match cfg.kind {
            PenaltyKind::L1 => SubgradientInterval::point(lambda.copysign(w_j)),
            PenaltyKind::Mcp => {
                if w_j.abs() <= lambda * cfg.gamma {
                    SubgradientInterval::point(lambda.copysign(w_j) - w_j / cfg.gamma)
                } else {
                    SubgradientInterval::point(0.0)
                }
            }
        }
    };
    let fusion = |diff: Option<f64>| match diff {
        None => SubgradientInterval::point(0.0),
        Some(0.0) => SubgradientInterval::symmetric(cfg.lambda_f),
        Some(d) => SubgradientInterval::point(cfg.lambda_f.copysign(d)),
    };
    sparsity + fusion(ctx.left_diff) + fusion(ctx.right_diff)
}

/// Signed distance from `-grad` to the interval: the minimal `grad + s` over `s` in it.
pub fn steepest_coordinate(grad: f64, s: SubgradientInterval) -> f64 {
    let target = -grad;
    if target > s.hi {
        grad + s.hi
    } else if target < s.lo {
        grad + s.lo
    } else {
        0.0
    }
}
