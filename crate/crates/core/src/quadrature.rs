//! Globally adaptive Gauss–Kronrod (10/21 point) integration on finite intervals.

use crate::error::{Error, Result};

// Abscissae of the 21-point Kronrod rule on [-1, 1], descending; odd entries
// (1, 3, 5, 7, 9) are the 10-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_512_750,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[10] * fc;
    let mut g = 0.0;
    for i in 0..10 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        k += WGK[i] * pair;
        if i % 2 == 1 {
            g += WG[i / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: k * h,
        error: ((k - g) * h).abs(),
    }
}

/// Tolerances and subdivision budget for [`Adaptive::integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptive {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-10,
            max_segments: 4000,
        }
    }
}

impl Adaptive {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    /// Same budget with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol / factor,
            rel_tol: self.rel_tol / factor,
            max_segments: self.max_segments * 4,
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<QuadResult> {
        self.integrate_with_breaks(f, &[a, b])
    }

    /// Integrate over `[min(points), max(points)]`, starting from the partition
    /// induced by `points` (unsorted, duplicates allowed).
    pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(&self, mut f: F, points: &[f64]) -> Result<QuadResult> {
        let mut pts: Vec<f64> = points.iter().copied().filter(|p| p.is_finite()).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if pts.len() < 2 {
            return Ok(QuadResult {
                value: 0.0,
                error: 0.0,
                evals: 0,
            });
        }

        let mut segs: Vec<Segment> = pts.windows(2).map(|w| kronrod(&mut f, w[0], w[1])).collect();
        let mut evals = 21 * segs.len();
        loop {
            let value: f64 = segs.iter().map(|s| s.value).sum();
            let error: f64 = segs.iter().map(|s| s.error).sum();
            let target = self.abs_tol.max(self.rel_tol * value.abs());
            if error <= target {
                return Ok(QuadResult { value, error, evals });
            }
            if !value.is_finite() || segs.len() >= self.max_segments {
                return Err(Error::Quadrature {
                    context: String::new(),
                    estimate: value,
                    error,
                });
            }
            // bisect the worst segment unless it has hit floating-point resolution
            let (worst, seg) = segs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
                .map(|(i, s)| (i, *s))
                .expect("non-empty");
            let mid = 0.5 * (seg.a + seg.b);
            if mid <= seg.a || mid >= seg.b || (seg.b - seg.a) < 4.0 * f64::EPSILON * seg.a.abs().max(seg.b.abs()) {
                // unresolvable at double precision; accept what is left if it is small
                if error <= 10.0 * target {
                    return Ok(QuadResult { value, error, evals });
                }
                return Err(Error::Quadrature {
                    context: String::new(),
                    estimate: value,
                    error,
                });
            }
            let left = kronrod(&mut f, seg.a, mid);
            let right = kronrod(&mut f, mid, seg.b);
            evals += 42;
            segs[worst] = left;
            segs.push(right);
        }
    }
}

/// Attach a location to a quadrature error.
pub fn with_context<T>(r: Result<T>, context: impl FnOnce() -> String) -> Result<T> {
    r.map_err(|e| match e {
        Error::Quadrature { estimate, error, .. } => Error::Quadrature {
            context: format!(" at {}", context()),
            estimate,
            error,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    #[test]
    fn rules_are_exact_on_polynomials() {
        // Kronrod part is exact to degree 31, Gauss part to degree 19.
        let mut f = |x: f64| x.powi(30) + 3.0 * x.powi(7) - x.powi(2);
        let s = kronrod(&mut f, -1.0, 1.0);
        let exact = 2.0 / 31.0 - 2.0 / 3.0;
        assert!((s.value - exact).abs() < 1e-14);
        let mut g = |x: f64| x.powi(18);
        let s = kronrod(&mut g, 0.0, 2.0);
        assert!((s.value - 2f64.powi(19) / 19.0).abs() < 1e-9);
        assert!(s.error < 1e-9 * s.value);
    }

    #[test]
    fn gaussian_moments_with_half_factor() {
        // int_0^inf y^n exp(-y^2/s) dy = Gamma((n+1)/2) s^((n+1)/2) / 2
        let q = Adaptive::new(1e-300, 1e-13);
        for &s in &[0.01, 0.5, 3.0] {
            for n in 0..=6 {
                let edge = 40.0 * f64::sqrt(s);
                let got = q
                    .integrate_with_breaks(
                        |y| y.powi(n) * (-y * y / s).exp(),
                        &[0.0, s.sqrt(), 4.0 * s.sqrt(), edge],
                    )
                    .unwrap()
                    .value;
                let m = (n as f64 + 1.0) / 2.0;
                let exact = 0.5 * gamma(m) * s.powf(m);
                assert!(((got - exact) / exact).abs() < 1e-10, "n={n} s={s}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn endpoint_singularity_converges() {
        let q = Adaptive::new(1e-12, 1e-10);
        let r = q.integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn non_integrable_reports_error() {
        let q = Adaptive {
            max_segments: 200,
            ..Adaptive::default()
        };
        let r = q.integrate(|x| 1.0 / x, 0.0, 1.0);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
        let r = with_context(r, || "x=0".into());
        assert!(r.unwrap_err().to_string().contains("at x=0"));
    }
}
