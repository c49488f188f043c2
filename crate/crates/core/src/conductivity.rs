//! Effective conductivity tensor, anisotropy coefficient and reference formulas.
//!
//! All conductivities are normalised by the matrix conductivity. The tensor
//! formulas assume perfectly conducting spheres.

use std::f64::consts::PI;

use thiserror::Error;

use crate::eisenstein::EisensteinEvaluator;
use crate::geometry::SphereConfiguration;
use crate::structural_sums::StructuralSums;

/// Order label of the truncated tensor series.
pub const TRUNCATION_ORDER: &str = "O(f^(10/3))";

/// `f^3` coefficient of the isotropic RSA formula.
pub const RSA_F3_COEFFICIENT: f64 = 4.80654;

/// Coefficients of the higher-order simple cubic terms.
const SC_F13_3: f64 = 3.913;
const SC_F17_3: f64 = 1.469;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("concentration {0} outside [0, 1)")]
    Concentration(f64),
    #[error("contrast parameter {0} outside (-1/2, 1]")]
    Contrast(f64),
}

/// Inclusion-to-matrix conductivity ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contrast {
    PerfectlyConducting,
    Ratio(f64),
}

impl Contrast {
    /// Contrast from `beta = (l1 - 1)/(l1 + 2)`.
    pub fn from_beta(beta: f64) -> Result<Self, DomainError> {
        if !(beta > -0.5 && beta <= 1.0) {
            return Err(DomainError::Contrast(beta));
        }
        if beta == 1.0 {
            Ok(Self::PerfectlyConducting)
        } else {
            Ok(Self::Ratio((1.0 + 2.0 * beta) / (1.0 - beta)))
        }
    }

    pub fn beta(self) -> f64 {
        match self {
            Self::PerfectlyConducting => 1.0,
            Self::Ratio(r) => (r - 1.0) / (r + 2.0),
        }
    }

    /// `(l1 + 2)/(2 l1 + 3)`, with its limit `1/2` for perfect conductors.
    fn jeffrey_ratio(self) -> f64 {
        match self {
            Self::PerfectlyConducting => 0.5,
            Self::Ratio(r) => (r + 2.0) / (2.0 * r + 3.0),
        }
    }
}

/// Closed-form reference formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AsymptoticFormula {
    ClausiusMossotti,
    EinsteinViscosity,
    Jeffrey,
    SimpleCubicCma,
    BerdichevskySc,
    IsotropicRsa,
    CombinedRsa,
}

impl AsymptoticFormula {
    pub const ALL: [AsymptoticFormula; 7] = [
        Self::ClausiusMossotti,
        Self::EinsteinViscosity,
        Self::Jeffrey,
        Self::SimpleCubicCma,
        Self::BerdichevskySc,
        Self::IsotropicRsa,
        Self::CombinedRsa,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::ClausiusMossotti => "clausius_mossotti",
            Self::EinsteinViscosity => "einstein_viscosity",
            Self::Jeffrey => "jeffrey",
            Self::SimpleCubicCma => "simple_cubic_cma",
            Self::BerdichevskySc => "berdichevsky_sc",
            Self::IsotropicRsa => "isotropic_rsa",
            Self::CombinedRsa => "combined_rsa",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.id() == id)
    }
}

/// `f^2` coefficient of Jeffrey's formula as printed, without the omitted tail.
pub fn jeffrey_f2_coefficient(contrast: Contrast) -> f64 {
    let b = contrast.beta();
    3.0 * b * b + 3.0 * b.powi(3) * (0.75 + 9.0 / 16.0 * contrast.jeffrey_ratio())
}

/// Evaluates a reference formula at concentration `f`.
pub fn asymptotic(formula: AsymptoticFormula, f: f64, contrast: Contrast) -> Result<f64, DomainError> {
    if !(0.0..1.0).contains(&f) {
        return Err(DomainError::Concentration(f));
    }
    let b = contrast.beta();
    let cubic_tail = |f: f64| {
        let d = (1.0 - f).powi(2);
        SC_F13_3 * f.powf(13.0 / 3.0) / d + SC_F17_3 * f.powf(17.0 / 3.0) / d
    };
    let cma = (1.0 + 2.0 * f) / (1.0 - f);
    Ok(match formula {
        AsymptoticFormula::ClausiusMossotti => (1.0 + 2.0 * b * f) / (1.0 - b * f),
        AsymptoticFormula::EinsteinViscosity => 1.0 + 2.5 * f,
        AsymptoticFormula::Jeffrey => 1.0 + 3.0 * b * f + jeffrey_f2_coefficient(contrast) * f * f,
        AsymptoticFormula::SimpleCubicCma => cma,
        AsymptoticFormula::BerdichevskySc => cma + cubic_tail(f),
        AsymptoticFormula::IsotropicRsa => 1.0 + 3.0 * f + 3.0 * f * f + RSA_F3_COEFFICIENT * f.powi(3),
        AsymptoticFormula::CombinedRsa => cma + (RSA_F3_COEFFICIENT - 3.0) * f.powi(3) + cubic_tail(f),
    })
}

fn scale() -> f64 {
    3.0 / (4.0 * PI)
}

/// `f^2` coefficient `3 (3/4pi) e11` of `lambda11`.
pub fn lambda11_f2_coefficient(s: &StructuralSums) -> f64 {
    3.0 * scale() * s.e11()
}

/// `f^3` coefficient `3 (3/4pi)^2 [e_{11*11} + 3(e_{12*12} + e_{13*13})]` of `lambda11`.
pub fn lambda11_f3_coefficient(s: &StructuralSums) -> f64 {
    f3_coefficient(
        s.conv_labels(1, 1, 1, 1),
        s.conv_labels(1, 2, 1, 2),
        s.conv_labels(1, 3, 1, 3),
    )
}

/// The `f^3` coefficient from its three convolution sums.
pub fn f3_coefficient(conv_11_11: f64, conv_12_12: f64, conv_13_13: f64) -> f64 {
    3.0 * scale().powi(2) * (conv_11_11 + 3.0 * (conv_12_12 + conv_13_13))
}

pub fn lambda11(s: &StructuralSums, f: f64) -> f64 {
    1.0 + 3.0 * f + lambda11_f2_coefficient(s) * f * f + lambda11_f3_coefficient(s) * f.powi(3)
}

pub fn lambda12(s: &StructuralSums, f: f64) -> f64 {
    let conv =
        s.conv_labels(1, 2, 1, 1) + s.conv_labels(1, 2, 2, 2) + s.conv_labels(1, 3, 1, 3) + s.conv_labels(2, 3, 1, 3);
    9.0 * f * f * (scale() * s.e12() + f * scale().powi(2) * conv)
}

/// `lambda12` with subscripts 2 and 3 exchanged.
pub fn lambda13(s: &StructuralSums, f: f64) -> f64 {
    let conv =
        s.conv_labels(1, 3, 1, 1) + s.conv_labels(1, 3, 3, 3) + s.conv_labels(1, 2, 1, 2) + s.conv_labels(3, 2, 1, 2);
    9.0 * f * f * (scale() * s.e13() + f * scale().powi(2) * conv)
}

pub type Matrix3 = [[f64; 3]; 3];

/// Second-order tensor, its deviator and the anisotropy coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anisotropy {
    pub lambda2: Matrix3,
    pub deviator: Matrix3,
    pub kappa: f64,
    /// `kappa / (9/4pi)^3`.
    pub kappa_normalized: f64,
}

impl Anisotropy {
    pub fn from_sums(s: &StructuralSums) -> Self {
        let (e11, e22, e33) = (s.e11(), s.e11_star(), s.e11_dstar());
        let (e12, e13, e23) = (s.e12(), s.e13(), s.e23());
        let k = 9.0 / (4.0 * PI);
        let lambda2 = [
            [k * e11, k * 3.0 * e12, k * 3.0 * e13],
            [k * 3.0 * e12, k * e22, k * 3.0 * e23],
            [k * 3.0 * e13, k * 3.0 * e23, k * e33],
        ];
        let d = scale();
        let g = [2.0 * e11 - e22 - e33, 2.0 * e22 - e11 - e33, 2.0 * e33 - e11 - e22];
        let deviator = [
            [d * g[0], d * 9.0 * e12, d * 9.0 * e13],
            [d * 9.0 * e12, d * g[1], d * 9.0 * e23],
            [d * 9.0 * e13, d * 9.0 * e23, d * g[2]],
        ];
        let kappa = det3(&deviator).abs();
        Self {
            lambda2,
            deviator,
            kappa,
            kappa_normalized: kappa / k.powi(3),
        }
    }
}

pub fn det3(m: &Matrix3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Anisotropy of a configuration from freshly computed structural sums.
pub fn anisotropy(config: &SphereConfiguration, eval: &EisensteinEvaluator) -> Anisotropy {
    Anisotropy::from_sums(&StructuralSums::compute(config, eval))
}

/// Everything reported for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityReport {
    pub f: f64,
    pub contrast: Contrast,
    /// Tensor entries. `11`, `12`, `13` carry the `f^3` terms; the others stop at `f^2`.
    pub lambda: Matrix3,
    pub f2_coefficient: f64,
    pub f3_coefficient: f64,
    pub anisotropy: Anisotropy,
    pub jeffrey_f2_coefficient: f64,
    pub baselines: Vec<(AsymptoticFormula, f64)>,
}

impl ConductivityReport {
    pub fn new(s: &StructuralSums, f: f64, contrast: Contrast) -> Result<Self, DomainError> {
        if !(f > 0.0 && f < 1.0) {
            return Err(DomainError::Concentration(f));
        }
        let anisotropy = Anisotropy::from_sums(s);
        let first = 1.0 + 3.0 * f;
        let l2 = &anisotropy.lambda2;
        let (l11, l12, l13) = (lambda11(s, f), lambda12(s, f), lambda13(s, f));
        let l22 = first + f * f * l2[1][1];
        let l33 = first + f * f * l2[2][2];
        let l23 = f * f * l2[1][2];
        let lambda = [[l11, l12, l13], [l12, l22, l23], [l13, l23, l33]];
        let baselines = AsymptoticFormula::ALL
            .iter()
            .map(|&id| asymptotic(id, f, contrast).map(|v| (id, v)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            f,
            contrast,
            lambda,
            f2_coefficient: lambda11_f2_coefficient(s),
            f3_coefficient: lambda11_f3_coefficient(s),
            anisotropy,
            jeffrey_f2_coefficient: jeffrey_f2_coefficient(contrast),
            baselines,
        })
    }

    /// `key=value` pairs in a stable order.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("f".to_string(), fmt(self.f)),
            ("beta".to_string(), fmt(self.contrast.beta())),
            ("truncation_order".to_string(), TRUNCATION_ORDER.to_string()),
        ];
        for i in 0..3 {
            for j in i..3 {
                out.push((format!("lambda{}{}", i + 1, j + 1), fmt(self.lambda[i][j])));
            }
        }
        out.push(("f2_coefficient".into(), fmt(self.f2_coefficient)));
        out.push(("f3_coefficient".into(), fmt(self.f3_coefficient)));
        out.extend(anisotropy_key_values(&self.anisotropy));
        out.push(("jeffrey_f2_coefficient".into(), fmt(self.jeffrey_f2_coefficient)));
        for (id, v) in &self.baselines {
            out.push((format!("baseline_{}", id.id()), fmt(*v)));
        }
        out
    }
}

/// `key=value` pairs for the tensor, deviator and `kappa`.
pub fn anisotropy_key_values(a: &Anisotropy) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            out.push((format!("Lambda2_{}{}", i + 1, j + 1), fmt(a.lambda2[i][j])));
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            out.push((format!("deviator_{}{}", i + 1, j + 1), fmt(a.deviator[i][j])));
        }
    }
    out.push(("kappa".into(), fmt(a.kappa)));
    out.push(("kappa_normalized".into(), fmt(a.kappa_normalized)));
    out
}

/// Locale-independent round-trip formatting used for every reported number.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eisenstein::FOUR_PI_OVER_THREE;
    use crate::geometry::generate_rsa;
    use crate::lattice_sums::coulombic_table;
    use approx::assert_relative_eq;

    fn simple_cubic() -> StructuralSums {
        let eval = EisensteinEvaluator::new(coulombic_table(20).unwrap(), 8).unwrap();
        StructuralSums::compute(&SphereConfiguration::new(vec![[0.0; 3]], 0.3).unwrap(), &eval)
    }

    #[test]
    fn reference_formulas() {
        let pc = Contrast::PerfectlyConducting;
        assert_relative_eq!(
            asymptotic(AsymptoticFormula::ClausiusMossotti, 0.1, pc).unwrap(),
            1.2 / 0.9
        );
        assert_relative_eq!(asymptotic(AsymptoticFormula::EinsteinViscosity, 0.2, pc).unwrap(), 1.5);
        let rsa = asymptotic(AsymptoticFormula::IsotropicRsa, 0.3, pc).unwrap();
        assert!((rsa - 2.29978).abs() < 5e-6, "{rsa}");
        assert_eq!(
            asymptotic(AsymptoticFormula::CombinedRsa, 1.0, pc),
            Err(DomainError::Concentration(1.0))
        );
    }

    #[test]
    fn combined_and_isotropic_rsa_agree_past_third_order() {
        let pc = Contrast::PerfectlyConducting;
        for f in [0.01, 0.02, 0.05, 0.1, 0.2] {
            let d = asymptotic(AsymptoticFormula::CombinedRsa, f, pc).unwrap()
                - asymptotic(AsymptoticFormula::IsotropicRsa, f, pc).unwrap();
            assert!((d / f.powf(10.0 / 3.0)).abs() < 10.0, "f={f}");
        }
    }

    #[test]
    fn contrast_round_trips_beta() {
        assert_eq!(Contrast::from_beta(1.0).unwrap(), Contrast::PerfectlyConducting);
        let c = Contrast::from_beta(0.4).unwrap();
        assert_relative_eq!(c.beta(), 0.4, epsilon = 1e-15);
        assert!(Contrast::from_beta(-0.5).is_err());
        assert!(Contrast::from_beta(1.1).is_err());
    }

    #[test]
    fn jeffrey_coefficient_as_printed() {
        assert_relative_eq!(
            jeffrey_f2_coefficient(Contrast::PerfectlyConducting),
            3.0 + 3.0 * (0.75 + 9.0 / 32.0)
        );
        let finite = Contrast::Ratio(10.0);
        let b: f64 = 9.0 / 12.0;
        assert_relative_eq!(
            jeffrey_f2_coefficient(finite),
            3.0 * b * b + 3.0 * b.powi(3) * (0.75 + 9.0 / 16.0 * 12.0 / 23.0)
        );
    }

    #[test]
    fn simple_cubic_series() {
        let s = simple_cubic();
        assert_eq!(s.e11(), FOUR_PI_OVER_THREE);
        for f in [0.05, 0.1, 0.2] {
            assert_relative_eq!(
                lambda11(&s, f),
                1.0 + 3.0 * f + 3.0 * f * f + 3.0 * f.powi(3),
                epsilon = 1e-14
            );
            assert_eq!(lambda12(&s, f), 0.0);
            assert_eq!(lambda13(&s, f), 0.0);
            let cma = asymptotic(AsymptoticFormula::ClausiusMossotti, f, Contrast::PerfectlyConducting).unwrap();
            assert!(((lambda11(&s, f) - cma) / f.powi(3)).abs() < 3.0 * f / (1.0 - f) + 1e-9);
        }
        assert_eq!(lambda11(&s, 0.0), 1.0);
        assert_eq!(Anisotropy::from_sums(&s).kappa, 0.0);
    }

    #[test]
    fn report_is_symmetric_with_traceless_deviator() {
        let eval = EisensteinEvaluator::new(coulombic_table(30).unwrap(), 8).unwrap();
        let config = generate_rsa(30, 0.25, 3).unwrap();
        let s = StructuralSums::compute(&config, &eval);
        let r = ConductivityReport::new(&s, 0.25, Contrast::PerfectlyConducting).unwrap();
        let a = &r.anisotropy;
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.lambda2[i][j], a.lambda2[j][i]);
                assert_eq!(r.lambda[i][j], r.lambda[j][i]);
            }
        }
        let trace = a.deviator[0][0] + a.deviator[1][1] + a.deviator[2][2];
        assert!(trace.abs() < 1e-12);
        assert!(a.kappa >= 0.0);
        assert_eq!(r.key_values().iter().filter(|(k, _)| k == "kappa").count(), 1);
    }

    #[test]
    fn collinear_spheres_are_anisotropic() {
        let eval = EisensteinEvaluator::new(coulombic_table(30).unwrap(), 8).unwrap();
        let pts: Vec<[f64; 3]> = (0..4).map(|i| [-0.375 + 0.25 * i as f64, 0.0, 0.0]).collect();
        let config = SphereConfiguration::new(pts, 0.1).unwrap();
        assert!(anisotropy(&config, &eval).kappa > 1e-3);
    }

    #[test]
    fn kappa_is_invariant_under_cube_symmetries() {
        let eval = EisensteinEvaluator::new(coulombic_table(30).unwrap(), 8).unwrap();
        let config = generate_rsa(25, 0.2, 8).unwrap();
        let base = anisotropy(&config, &eval).kappa;
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for perm in perms {
            for bits in 0..8 {
                let sign = std::array::from_fn(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 });
                let k = anisotropy(&config.transform_axes(perm, sign), &eval).kappa;
                assert!(
                    (k - base).abs() < 1e-8 * base.max(1.0),
                    "{perm:?} {sign:?}: {k} vs {base}"
                );
            }
        }
    }

    #[test]
    fn mirror_negates_the_odd_part_of_lambda12() {
        // Every term of lambda12 is odd under x1 -> -x1 except e_{13*13}, which
        // the formula shares with lambda11.
        let eval = EisensteinEvaluator::new(coulombic_table(30).unwrap(), 8).unwrap();
        let config = generate_rsa(20, 0.2, 5).unwrap();
        let a = StructuralSums::compute(&config, &eval);
        let b = StructuralSums::compute(&config.transform_axes([0, 1, 2], [-1.0, 1.0, 1.0]), &eval);
        let f: f64 = 0.2;
        let even = 9.0 * f.powi(3) * scale().powi(2) * a.conv_labels(1, 3, 1, 3);
        assert!((b.conv_labels(1, 3, 1, 3) - a.conv_labels(1, 3, 1, 3)).abs() < 1e-10);
        assert!((lambda12(&a, f) + lambda12(&b, f) - 2.0 * even).abs() < 1e-10);
    }

    #[test]
    fn lambda11_increases_with_concentration() {
        let eval = EisensteinEvaluator::new(coulombic_table(30).unwrap(), 8).unwrap();
        let s = StructuralSums::compute(&generate_rsa(60, 0.3, 2).unwrap(), &eval);
        let values: Vec<f64> = (1..=35).map(|i| lambda11(&s, 0.01 * i as f64)).collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]));
    }
}
