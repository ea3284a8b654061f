//! Adaptive Gauss-Kronrod (7/15) integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_SEGMENTS: usize = 4000;

/// Tolerances for [`integrate`]. The run stops once the summed error
/// estimate drops below `max(abs, rel * |I|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-13, rel: 1e-13 }
    }
}

/// Nodes and weights of the 15-point Kronrod rule repeated on `panels`
/// equal subintervals of `[a, b]`. Exact for polynomials of degree 23 on
/// each panel.
pub fn composite_kronrod_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(15 * panels);
    for p in 0..panels {
        let center = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        for (x, w) in XGK.iter().zip(WGK.iter()) {
            if *x == 0.0 {
                out.push((center, w * half));
            } else {
                out.push((center - half * x, w * half));
                out.push((center + half * x, w * half));
            }
        }
    }
    out
}

/// One K15 rule application.
///
/// Returns the Kronrod estimate, an error estimate scaled the way QUADPACK's
/// `qk15` does, and the integral of `|f|` (the round-off scale).
pub fn gauss_kronrod_15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut resabs = WGK[7] * fc.abs();
    let mut samples = [(0.0, 0.0); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (f1, f2) = (f(center - dx), f(center + dx));
        samples[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((samples[j].0 - mean).abs() + (samples[j].1 - mean).abs());
    }
    let half_abs = half.abs();
    let resasc = resasc * half_abs;
    let resabs = resabs * half_abs;
    let mut err = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (kronrod * half, err, resabs)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    resabs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`, bisecting the
/// segment with the largest error estimate.
///
/// The requested tolerance is floored at the round-off level of the
/// integrand, so asking for more than double precision can deliver is not
/// an error.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (value, error, resabs) = gauss_kronrod_15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error, resabs });
    let mut total = value;
    let mut total_err = error;
    let mut total_abs = resabs;
    loop {
        let target = tol
            .abs
            .max(tol.rel * total.abs())
            .max(100.0 * f64::EPSILON * total_abs);
        if total_err <= target {
            break;
        }
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature { a, b, estimate: total_err });
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Segment exhausted in floating point; keep what we have.
            heap.push(seg);
            break;
        }
        let (v1, e1, r1) = gauss_kronrod_15(&mut f, seg.a, mid);
        let (v2, e2, r2) = gauss_kronrod_15(&mut f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        total_abs += r1 + r2 - seg.resabs;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1, resabs: r1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2, resabs: r2 });
    }
    // Re-sum to shed the drift of the running update.
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Integrates piecewise over `breaks` (ascending), one adaptive run per piece.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: Tolerance) -> Result<f64> {
    breaks
        .windows(2)
        .map(|w| integrate(&mut f, w[0], w[1], tol))
        .sum()
}

/// Vector-valued variant of [`integrate`]: `f(x, out)` fills `out` with
/// `dim` integrand values and every component shares one adaptive
/// partition. Refinement continues until each component meets the
/// tolerance.
pub fn integrate_many<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    dim: usize,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Vec<f64>> {
    struct VecSegment {
        a: f64,
        b: f64,
        value: Vec<f64>,
        error: Vec<f64>,
        resabs: Vec<f64>,
    }

    let mut buf = vec![0.0; dim];
    let mut rule = |a: f64, b: f64| -> VecSegment {
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut samples = vec![[0.0; 15]; dim];
        let mut node = |x: f64, slot: usize, samples: &mut Vec<[f64; 15]>| {
            f(x, &mut buf);
            for (s, v) in samples.iter_mut().zip(&buf) {
                s[slot] = *v;
            }
        };
        node(center, 14, &mut samples);
        for j in 0..7 {
            let dx = half * XGK[j];
            node(center - dx, 2 * j, &mut samples);
            node(center + dx, 2 * j + 1, &mut samples);
        }
        let mut value = Vec::with_capacity(dim);
        let mut error = Vec::with_capacity(dim);
        let mut resabs_v = Vec::with_capacity(dim);
        for s in &samples {
            let fc = s[14];
            let mut kronrod = WGK[7] * fc;
            let mut gauss = WG[3] * fc;
            let mut resabs = WGK[7] * fc.abs();
            for j in 0..7 {
                let (f1, f2) = (s[2 * j], s[2 * j + 1]);
                kronrod += WGK[j] * (f1 + f2);
                resabs += WGK[j] * (f1.abs() + f2.abs());
                if j % 2 == 1 {
                    gauss += WG[j / 2] * (f1 + f2);
                }
            }
            let mean = 0.5 * kronrod;
            let mut resasc = WGK[7] * (fc - mean).abs();
            for j in 0..7 {
                resasc += WGK[j] * ((s[2 * j] - mean).abs() + (s[2 * j + 1] - mean).abs());
            }
            let resasc = resasc * half.abs();
            let resabs = resabs * half.abs();
            let mut err = ((kronrod - gauss) * half).abs();
            if resasc != 0.0 && err != 0.0 {
                err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
            }
            if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
                err = err.max(50.0 * f64::EPSILON * resabs);
            }
            value.push(kronrod * half);
            error.push(err);
            resabs_v.push(resabs);
        }
        VecSegment { a, b, value, error, resabs: resabs_v }
    };

    let mut segments: Vec<VecSegment> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| rule(w[0], w[1]))
        .collect();
    if segments.is_empty() {
        return Ok(vec![0.0; dim]);
    }
    loop {
        let mut total = vec![0.0; dim];
        let mut total_err = vec![0.0; dim];
        let mut total_abs = vec![0.0; dim];
        for s in &segments {
            for i in 0..dim {
                total[i] += s.value[i];
                total_err[i] += s.error[i];
                total_abs[i] += s.resabs[i];
            }
        }
        // Worst component relative to its own target.
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..dim {
            let target = tol
                .abs
                .max(tol.rel * total[i].abs())
                .max(100.0 * f64::EPSILON * total_abs[i]);
            let ratio = total_err[i] / target;
            if ratio > 1.0 && worst.is_none_or(|(_, r)| ratio > r) {
                worst = Some((i, ratio));
            }
        }
        let Some((component, _)) = worst else {
            return Ok(total);
        };
        if segments.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature {
                a: breaks[0],
                b: *breaks.last().unwrap(),
                estimate: total_err[component],
            });
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error[component].total_cmp(&y.1.error[component]))
            .expect("segments is non-empty");
        let seg = segments.swap_remove(idx);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            segments.push(seg);
            return Ok(total);
        }
        segments.push(rule(seg.a, mid));
        segments.push(rule(mid, seg.b));
    }
}
