//! Stability and frequency response of the linearized TS-LIF system.
//!
//! With spiking and resets removed the population obeys
//! `v[t] = A v[t-1] + B c[t]` with
//!
//! ```text
//! A = [[a1,      b1        ],
//!      [a1 * b2, a2 + b1*b2]]
//! ```
//!
//! Eigenvalues come from `l^2 - (a1 + a2 + b1*b2) l + a1*a2 = 0`. Note that the
//! reciprocal polynomial `1 - (a1 + a2 + b1*b2) l + a1*a2 l^2` has the inverse
//! roots; only the monic form yields the decay rates of the recursion.
//!
//! Transfer functions are rational in `z^-1`:
//!
//! ```text
//! H_d(z) = [(1-a1) + (-(1-a1) a2 + b1 (1-a2)) z^-1] / det M(z)
//! H_s(z) = [(b2 (1-a1) + (1-a2)) - a1 (1-a2) z^-1] / det M(z)
//! det M(z) = 1 - (a1 + a2 + b1*b2) z^-1 + a1*a2 z^-2
//! ```

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::neuron::{NeuronParams, TwoCompartmentParams};

/// Tolerance on `|lambda|` around the unit circle for the marginal verdict.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Minimum `|det M(e^{jw})|` below which the response is treated as a pole.
const POLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemMatrix {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl SystemMatrix {
    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }
}

pub fn system_matrix(params: &NeuronParams) -> SystemMatrix {
    let (a1, a2, b1, b2) = (params.alpha1(), params.alpha2(), params.beta1(), params.beta2());
    SystemMatrix {
        a11: a1,
        a12: b1,
        a21: a1 * b2,
        a22: a2 + b1 * b2,
    }
}

/// Input gain vector `B` of the state-space form.
pub fn input_vector(params: &NeuronParams) -> [f64; 2] {
    let (a1, a2, b2) = (params.alpha1(), params.alpha2(), params.beta2());
    [1.0 - a1, b2 * (1.0 - a1) + (1.0 - a2)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

impl Verdict {
    pub fn classify(spectral_radius: f64) -> Self {
        if (spectral_radius - 1.0).abs() <= MARGINAL_TOL {
            Verdict::Marginal
        } else if spectral_radius < 1.0 {
            Verdict::Stable
        } else {
            Verdict::Unstable
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// The eigenvalue of larger modulus.
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    pub spectral_radius: f64,
    pub verdict: Verdict,
}

/// Roots of `l^2 - sum * l + product = 0`, larger modulus first.
fn quadratic_roots(sum: f64, product: f64) -> (Complex64, Complex64) {
    let disc = sum * sum - 4.0 * product;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // avoid cancellation: compute the large root directly, the other from the product
        let big = if sum >= 0.0 {
            (sum + sq) / 2.0
        } else {
            (sum - sq) / 2.0
        };
        let small = if big != 0.0 { product / big } else { 0.0 };
        let (l1, l2) = if big.abs() >= small.abs() {
            (big, small)
        } else {
            (small, big)
        };
        (Complex64::new(l1, 0.0), Complex64::new(l2, 0.0))
    } else {
        let re = sum / 2.0;
        let im = (-disc).sqrt() / 2.0;
        (Complex64::new(re, im), Complex64::new(re, -im))
    }
}

fn report_from(sum: f64, product: f64) -> StabilityReport {
    let (lambda1, lambda2) = quadratic_roots(sum, product);
    let spectral_radius = lambda1.norm().max(lambda2.norm());
    StabilityReport {
        lambda1,
        lambda2,
        spectral_radius,
        verdict: Verdict::classify(spectral_radius),
    }
}

pub fn stability(params: &NeuronParams) -> StabilityReport {
    let (a1, a2, b1, b2) = (params.alpha1(), params.alpha2(), params.beta1(), params.beta2());
    report_from(a1 + a2 + b1 * b2, a1 * a2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Compartment {
    Dendrite,
    Soma,
}

/// `num[0] + num[1] z^-1` over `den[0] + den[1] z^-1 + den[2] z^-2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RationalTransfer {
    pub num: [f64; 2],
    pub den: [f64; 3],
    pub label: Compartment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyResponse {
    pub magnitude: f64,
    /// In `(-pi, pi]`.
    pub phase: f64,
}

impl RationalTransfer {
    /// `H` at an arbitrary point `z` (not on a pole).
    pub fn eval_z(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let num = self.num[0] + self.num[1] * zi;
        let den = self.den[0] + self.den[1] * zi + self.den[2] * zi * zi;
        num / den
    }

    /// `H(e^{j omega})` for `omega` in `[0, pi]`.
    pub fn evaluate(&self, omega: f64) -> Result<FrequencyResponse> {
        if !(0.0..=PI).contains(&omega) {
            return Err(Error::InvalidParameter(format!(
                "omega must be in [0, pi], got {omega}"
            )));
        }
        let zi = Complex64::from_polar(1.0, -omega);
        let num = self.num[0] + self.num[1] * zi;
        let den = self.den[0] + self.den[1] * zi + self.den[2] * zi * zi;
        if den.norm() < POLE_EPS {
            return Err(Error::Singularity { omega });
        }
        let h = num / den;
        let mut phase = h.arg();
        if phase <= -PI {
            phase = PI;
        }
        Ok(FrequencyResponse {
            magnitude: h.norm(),
            phase,
        })
    }

    /// `H(1)`, i.e. the steady-state gain for a constant input.
    pub fn dc_gain(&self) -> Result<f64> {
        let den: f64 = self.den.iter().sum();
        if den.abs() < POLE_EPS {
            return Err(Error::Singularity { omega: 0.0 });
        }
        Ok((self.num[0] + self.num[1]) / den)
    }

    /// First `n` impulse-response terms by long division of `num / den`.
    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let mut h = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = self.num.get(k).copied().unwrap_or(0.0);
            for j in 1..self.den.len() {
                if k >= j {
                    acc -= self.den[j] * h[k - j];
                }
            }
            h.push(acc / self.den[0]);
        }
        h
    }
}

/// `(H_d, H_s)` of the input-to-potential maps.
pub fn transfer_functions(params: &NeuronParams) -> (RationalTransfer, RationalTransfer) {
    let (a1, a2, b1, b2) = (params.alpha1(), params.alpha2(), params.beta1(), params.beta2());
    let den = [1.0, -(a1 + a2 + b1 * b2), a1 * a2];
    let h_d = RationalTransfer {
        num: [1.0 - a1, -(1.0 - a1) * a2 + b1 * (1.0 - a2)],
        den,
        label: Compartment::Dendrite,
    };
    let h_s = RationalTransfer {
        num: [b2 * (1.0 - a1) + (1.0 - a2), -a1 * (1.0 - a2)],
        den,
        label: Compartment::Soma,
    };
    (h_d, h_s)
}

pub fn evaluate_response(h: &RationalTransfer, omega: f64) -> Result<FrequencyResponse> {
    h.evaluate(omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BodeRow {
    pub omega: f64,
    pub mag_d: f64,
    pub phase_d: f64,
    pub mag_s: f64,
    pub phase_s: f64,
}

/// Both responses on `points` equally spaced frequencies spanning `[0, pi]`.
pub fn bode_table(params: &NeuronParams, points: usize) -> Result<Vec<BodeRow>> {
    let (h_d, h_s) = transfer_functions(params);
    bode_rows(&h_d, &h_s, points)
}

pub fn bode_rows(h_d: &RationalTransfer, h_s: &RationalTransfer, points: usize) -> Result<Vec<BodeRow>> {
    if points < 2 {
        return Err(Error::InvalidParameter(format!(
            "bode table needs at least 2 points, got {points}"
        )));
    }
    (0..points)
        .map(|i| {
            let omega = PI * i as f64 / (points - 1) as f64;
            let d = h_d.evaluate(omega)?;
            let s = h_s.evaluate(omega)?;
            Ok(BodeRow {
                omega,
                mag_d: d.magnitude,
                phase_d: d.phase,
                mag_s: s.magnitude,
                phase_s: s.phase,
            })
        })
        .collect()
}

/// The generic two-compartment model shares the TS-LIF state matrix; only the
/// input path differs (the current enters the dendrite unscaled).
pub fn two_compartment_stability(params: &TwoCompartmentParams) -> StabilityReport {
    let p = params;
    report_from(p.alpha1 + p.alpha2 + p.beta1 * p.beta2, p.alpha1 * p.alpha2)
}

/// `(H_d, H_s)` of the two-compartment model: `(1 - a2 z^-1) / D` and `b2 / D`.
pub fn two_compartment_transfer_functions(
    params: &TwoCompartmentParams,
) -> (RationalTransfer, RationalTransfer) {
    let p = params;
    let den = [1.0, -(p.alpha1 + p.alpha2 + p.beta1 * p.beta2), p.alpha1 * p.alpha2];
    (
        RationalTransfer {
            num: [1.0, -p.alpha2],
            den,
            label: Compartment::Dendrite,
        },
        RationalTransfer {
            num: [p.beta2, 0.0],
            den,
            label: Compartment::Soma,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta_product: f64,
    pub spectral_radius: f64,
    pub verdict: Verdict,
}

/// Stability over a grid of coupling products `b1 * b2` at fixed decays.
pub fn sweep_stability_region(
    alpha1: f64,
    alpha2: f64,
    beta_products: &[f64],
) -> Result<Vec<SweepRow>> {
    if beta_products.is_empty() {
        return Err(Error::EmptyInput("stability sweep grid"));
    }
    // validates the decays
    NeuronParams::linear(alpha1, alpha2, 0.0, 0.0)?;
    Ok(beta_products
        .iter()
        .map(|&bp| {
            let r = report_from(alpha1 + alpha2 + bp, alpha1 * alpha2);
            SweepRow {
                beta_product: bp,
                spectral_radius: r.spectral_radius,
                verdict: r.verdict,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn matrix_entries() {
        let m = system_matrix(&NeuronParams::frequency_split());
        assert_eq!((m.a11, m.a12), (0.95, 0.0));
        assert!(close(m.a21, -0.855, 1e-15));
        assert_eq!(m.a22, 0.05);

        let d = system_matrix(&NeuronParams::linear(0.3, 0.6, 0.0, 0.0).unwrap());
        assert_eq!((d.a11, d.a12, d.a21, d.a22), (0.3, 0.0, 0.0, 0.6));

        let tc = system_matrix(&NeuronParams::linear(1.0, 1.0, -0.5, 0.5).unwrap());
        assert_eq!((tc.a11, tc.a12, tc.a21, tc.a22), (1.0, -0.5, 0.5, 0.75));
    }

    #[test]
    fn frequency_split_eigenvalues() {
        let r = stability(&NeuronParams::frequency_split());
        assert!(close(r.lambda1.re, 0.95, 1e-12) && r.lambda1.im == 0.0);
        assert!(close(r.lambda2.re, 0.05, 1e-12) && r.lambda2.im == 0.0);
        assert_eq!(r.verdict, Verdict::Stable);
    }

    #[test]
    fn identity_dynamics_are_marginal() {
        let r = stability(&NeuronParams::linear(1.0, 1.0, 0.0, 0.0).unwrap());
        assert_eq!(r.lambda1, Complex64::new(1.0, 0.0));
        assert_eq!(r.lambda2, Complex64::new(1.0, 0.0));
        assert_eq!(r.verdict, Verdict::Marginal);
    }

    #[test]
    fn negative_unit_coupling_puts_roots_on_circle() {
        let r = stability(&NeuronParams::linear(1.0, 1.0, -1.0, 1.0).unwrap());
        let h = 3f64.sqrt() / 2.0;
        assert!(close(r.lambda1.re, 0.5, 1e-15) && close(r.lambda1.im.abs(), h, 1e-15));
        assert!(close(r.lambda2.im, -r.lambda1.im, 0.0));
        assert!(close(r.spectral_radius, 1.0, 1e-15));
        assert_eq!(r.verdict, Verdict::Marginal);
    }

    #[test]
    fn frequency_split_transfer_coefficients() {
        let (h_d, h_s) = transfer_functions(&NeuronParams::frequency_split());
        assert!(close(h_d.num[0], 0.05, 1e-15) && close(h_d.num[1], -0.0025, 1e-15));
        assert!(close(h_s.num[0], 0.905, 1e-15) && close(h_s.num[1], -0.9025, 1e-15));
        for h in [h_d, h_s] {
            assert_eq!(h.den[0], 1.0);
            assert!(close(h.den[1], -1.0, 1e-15) && close(h.den[2], 0.0475, 1e-15));
        }
        assert_eq!(h_d.label, Compartment::Dendrite);
        assert_eq!(h_s.label, Compartment::Soma);
    }

    #[test]
    fn memoryless_system_is_identity() {
        let (h_d, h_s) = transfer_functions(&NeuronParams::linear(0.0, 0.0, 0.0, 0.0).unwrap());
        assert_eq!(h_d.num, [1.0, 0.0]);
        assert_eq!(h_s.num, [1.0, 0.0]);
        for w in [0.0, 1.0, PI] {
            assert!(close(h_d.evaluate(w).unwrap().magnitude, 1.0, 1e-15));
            assert!(close(h_s.evaluate(w).unwrap().magnitude, 1.0, 1e-15));
        }
    }

    #[test]
    fn frequency_split_gains() {
        let (h_d, h_s) = transfer_functions(&NeuronParams::frequency_split());
        assert!(close(h_d.evaluate(0.0).unwrap().magnitude, 1.0, 1e-12));
        assert!(close(h_s.evaluate(0.0).unwrap().magnitude, 0.0526, 1e-4));
        // (0.905 + 0.9025) / (1 + 1 + 0.0475)
        assert!(close(h_s.evaluate(PI).unwrap().magnitude, 1.8075 / 2.0475, 1e-12));
    }

    #[test]
    fn pole_on_unit_circle_is_reported() {
        let (h_d, _) = transfer_functions(&NeuronParams::linear(1.0, 0.0, 0.0, 0.0).unwrap());
        assert!(matches!(
            h_d.evaluate(0.0),
            Err(Error::Singularity { omega }) if omega == 0.0
        ));
        assert!(h_d.evaluate(-0.1).is_err());
        assert!(h_d.evaluate(4.0).is_err());
    }

    #[test]
    fn phase_range() {
        let (h_d, h_s) = transfer_functions(&NeuronParams::frequency_split());
        for i in 0..=256 {
            let w = PI * i as f64 / 256.0;
            for h in [h_d, h_s] {
                let r = h.evaluate(w).unwrap();
                assert!(r.phase > -PI && r.phase <= PI);
                assert!(r.magnitude >= 0.0);
            }
        }
    }

    #[test]
    fn sweep_examples() {
        let rows = sweep_stability_region(1.0, 1.0, &[-1.0, 0.0, 0.1]).unwrap();
        let v: Vec<Verdict> = rows.iter().map(|r| r.verdict).collect();
        assert_eq!(v, [Verdict::Marginal, Verdict::Marginal, Verdict::Unstable]);

        let rows = sweep_stability_region(0.0, 0.0, &[-0.9, -0.3, 0.0, 0.5, 0.99]).unwrap();
        for r in rows {
            assert_eq!(r.verdict, Verdict::Stable);
            assert!(close(r.spectral_radius, r.beta_product.abs(), 1e-15));
        }

        let p = NeuronParams::frequency_split();
        let rows = sweep_stability_region(p.alpha1(), p.alpha2(), &[p.beta1() * p.beta2()]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].verdict, Verdict::Stable);

        assert!(sweep_stability_region(0.5, 0.5, &[]).is_err());
    }

    #[test]
    fn two_compartment_impulse_matches_simulation() {
        use crate::frame::SeriesFrame;
        use crate::neuron::{simulate_two_compartment, SimOptions};
        let p = TwoCompartmentParams {
            alpha1: 0.8,
            alpha2: 0.3,
            beta1: -0.4,
            beta2: 0.6,
            v_th: 1.0,
        };
        let mut x = vec![0.0; 40];
        x[0] = 1.0;
        let frame = SeriesFrame::new(vec!["c".into()], 40, x).unwrap();
        let trace = simulate_two_compartment(&p, &frame, &SimOptions::linear()).unwrap();
        let (h_d, h_s) = two_compartment_transfer_functions(&p);
        for (h, v) in [(h_d, trace.v_d.unwrap()), (h_s, trace.v_s.unwrap())] {
            for (a, b) in h.impulse_response(40).iter().zip(v.data()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
        let tc = two_compartment_stability(&TwoCompartmentParams::tc_lif());
        assert_eq!(tc.verdict, Verdict::Marginal);
    }

    #[test]
    fn impulse_response_of_frequency_split_dendrite_is_geometric() {
        // H_d reduces to 0.05 / (1 - 0.95 z^-1) after the common factor cancels
        let (h_d, _) = transfer_functions(&NeuronParams::frequency_split());
        let h = h_d.impulse_response(20);
        for (k, v) in h.iter().enumerate() {
            assert!(close(*v, 0.05 * 0.95f64.powi(k as i32), 1e-14));
        }
    }

    fn stable_params() -> impl Strategy<Value = NeuronParams> {
        (0.0..0.98f64, 0.0..0.98f64, -0.5..0.5f64, -1.0..1.0f64)
            .prop_map(|(a1, a2, b1, b2)| NeuronParams::linear(a1, a2, b1, b2).unwrap())
            .prop_filter("stable", |p| stability(p).spectral_radius < 0.99)
    }

    proptest! {
        #[test]
        fn vieta_relations(a1 in 0.0..=1.0f64, a2 in 0.0..=1.0f64, b1 in -2.0..2.0f64, b2 in -2.0..2.0f64) {
            let p = NeuronParams::linear(a1, a2, b1, b2).unwrap();
            let r = stability(&p);
            let prod = r.lambda1 * r.lambda2;
            let sum = r.lambda1 + r.lambda2;
            let want_p = a1 * a2;
            let want_s = a1 + a2 + b1 * b2;
            prop_assert!((prod.re - want_p).abs() <= 1e-12 * want_p.abs().max(1.0));
            prop_assert!(prod.im.abs() <= 1e-12 * want_p.abs().max(1.0));
            prop_assert!((sum.re - want_s).abs() <= 1e-12 * want_s.abs().max(1.0));
            prop_assert!(r.spectral_radius >= r.lambda2.norm());
        }

        #[test]
        fn dc_gain_formula(p in stable_params()) {
            let (h_d, h_s) = transfer_functions(&p);
            let (a1, a2, b1, b2) = (p.alpha1(), p.alpha2(), p.beta1(), p.beta2());
            let den = 1.0 - (a1 + a2 + b1 * b2) + a1 * a2;
            let want = ((1.0 - a1) * (1.0 - a2) + b1 * (1.0 - a2)) / den;
            let got = h_d.dc_gain().unwrap();
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
            prop_assert!((h_d.evaluate(0.0).unwrap().magnitude - got.abs()).abs() <= 1e-12 * got.abs().max(1.0));
            let gs = h_s.dc_gain().unwrap();
            prop_assert!((h_s.evaluate(0.0).unwrap().magnitude - gs.abs()).abs() <= 1e-12 * gs.abs().max(1.0));
        }

        #[test]
        fn dendrite_is_low_pass(a1 in 0.9..0.999f64, a2 in 0.0..=0.1f64, b2 in -1.0..-1e-3f64) {
            let p = NeuronParams::linear(a1, a2, 0.0, b2).unwrap();
            let (h_d, _) = transfer_functions(&p);
            let lo = 0.01 * PI;
            let hi = 0.99 * PI;
            prop_assert!(h_d.evaluate(lo).unwrap().magnitude > h_d.evaluate(hi).unwrap().magnitude);
        }

        // The soma is high-pass only when b2 nearly cancels the dendritic path
        // (the DC gain is (b2 + 1 - a2) / (1 - a2)); weak coupling leaves it all-pass.
        #[test]
        fn soma_is_high_pass_under_strong_negative_coupling(
            a1 in 0.9..0.999f64, a2 in 0.0..=0.1f64, b2 in -1.0..-0.5f64,
        ) {
            let p = NeuronParams::linear(a1, a2, 0.0, b2).unwrap();
            let (_, h_s) = transfer_functions(&p);
            prop_assert!(h_s.evaluate(PI).unwrap().magnitude > h_s.evaluate(0.0).unwrap().magnitude);
            if a1 <= 0.97 {
                prop_assert!(
                    h_s.evaluate(0.99 * PI).unwrap().magnitude > h_s.evaluate(0.01 * PI).unwrap().magnitude
                );
            }
        }

        #[test]
        fn stable_verdict_means_no_singularity(p in stable_params()) {
            let r = stability(&p);
            prop_assert_eq!(r.verdict, Verdict::Stable);
            let (h_d, h_s) = transfer_functions(&p);
            for i in 0..1024 {
                let w = PI * i as f64 / 1023.0;
                prop_assert!(h_d.evaluate(w).is_ok());
                prop_assert!(h_s.evaluate(w).is_ok());
            }
        }
    }
}
