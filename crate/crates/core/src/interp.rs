//! Monotone cubic Hermite interpolation and point-to-polyline distance.

/// Piecewise cubic Hermite interpolant that preserves the monotonicity of
/// its data (Fritsch-Carlson slope limiting).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    /// Builds the interpolant from strictly increasing `xs`.
    ///
    /// When `slopes` is given (e.g. exact derivatives from an ODE) they are
    /// used as the starting tangents, otherwise three-point estimates are.
    /// Either way tangents are limited so each interval stays monotone.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, slopes: Option<Vec<f64>>) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 2, "need at least two nodes");
        debug_assert!(xs.windows(2).all(|w| w[0] < w[1]));
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();

        let mut ds = match slopes {
            Some(s) => {
                assert_eq!(s.len(), n);
                s
            }
            None => {
                let mut d = vec![0.0; n];
                d[0] = secants[0];
                d[n - 1] = secants[n - 2];
                for i in 1..n - 1 {
                    d[i] = if secants[i - 1] * secants[i] <= 0.0 {
                        0.0
                    } else {
                        0.5 * (secants[i - 1] + secants[i])
                    };
                }
                d
            }
        };

        for i in 0..n - 1 {
            let s = secants[i];
            if s == 0.0 {
                ds[i] = 0.0;
                ds[i + 1] = 0.0;
                continue;
            }
            if ds[i] * s < 0.0 {
                ds[i] = 0.0;
            }
            if ds[i + 1] * s < 0.0 {
                ds[i + 1] = 0.0;
            }
            let a = ds[i] / s;
            let b = ds[i + 1] / s;
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                ds[i] = tau * a * s;
                ds[i + 1] = tau * b * s;
            }
        }
        Self { xs, ys, ds }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    /// Value at `x`; `None` outside the node range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        if !(x >= self.x_min() && x <= self.x_max()) {
            return None;
        }
        let i = self.interval(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        if x == x0 {
            return Some(self.ys[i]);
        }
        if x == x1 {
            return Some(self.ys[i + 1]);
        }
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(
            h00 * self.ys[i]
                + h10 * h * self.ds[i]
                + h01 * self.ys[i + 1]
                + h11 * h * self.ds[i + 1],
        )
    }

    /// Derivative at `x`; `None` outside the node range.
    pub fn derivative(&self, x: f64) -> Option<f64> {
        if !(x >= self.x_min() && x <= self.x_max()) {
            return None;
        }
        let i = self.interval(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        Some(d00 * self.ys[i] + d10 * self.ds[i] + d01 * self.ys[i + 1] + d11 * self.ds[i + 1])
    }
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    };
    let dx = ap[0] - t * ab[0];
    let dy = ap[1] - t * ab[1];
    dx.hypot(dy)
}

/// Open polyline whose vertices have nondecreasing x coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pts: Vec<[f64; 2]>,
}

impl Polyline {
    pub fn new(pts: Vec<[f64; 2]>) -> Self {
        assert!(!pts.is_empty());
        debug_assert!(pts.windows(2).all(|w| w[0][0] <= w[1][0]));
        Self { pts }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.pts
    }

    /// Minimum Euclidean distance from `p` to the polyline.
    ///
    /// Segments whose x-extent lies farther than the running best are
    /// skipped, which is exact because vertices are sorted in x.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        if self.pts.len() == 1 {
            return point_segment_distance(p, self.pts[0], self.pts[0]);
        }
        // Seed with the segment spanning p.x (or the nearest end).
        let n = self.pts.len();
        let k = self.pts.partition_point(|q| q[0] < p[0]).clamp(1, n - 1);
        let mut best = point_segment_distance(p, self.pts[k - 1], self.pts[k]);
        // Walk left.
        let mut i = k - 1;
        while i > 0 {
            if p[0] - self.pts[i][0] > best {
                break;
            }
            best = best.min(point_segment_distance(p, self.pts[i - 1], self.pts[i]));
            i -= 1;
        }
        // Walk right.
        let mut j = k;
        while j + 1 < n {
            if self.pts[j][0] - p[0] > best {
                break;
            }
            best = best.min(point_segment_distance(p, self.pts[j], self.pts[j + 1]));
            j += 1;
        }
        best
    }
}
