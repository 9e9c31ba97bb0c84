use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::image::OdImage;
use crate::linalg::{self, Mat3, Vec3};
use crate::{Error, Result};

/// Hematoxylin OD direction from Ruifrok & Johnston, used as the default start.
pub const RUIFROK_HEMATOXYLIN: Vec3 = [0.65, 0.70, 0.29];
/// Eosin OD direction from Ruifrok & Johnston.
pub const RUIFROK_EOSIN: Vec3 = [0.07, 0.99, 0.11];

pub const MIN_WEIGHT: f64 = 0.05;
pub const MAX_WEIGHT: f64 = 20.0;
/// Stain vectors closer than this make the residual direction ill-defined.
pub const MIN_STAIN_ANGLE_DEG: f64 = 3.0;
pub const MAX_CONDITION: f64 = 1e6;

const UNIT_TOLERANCE: f64 = 1e-9;

/// Fitted stain appearance of one image: stain color matrix plus weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StainProfile {
    matrix: Mat3,
    wh: f64,
    we: f64,
}

impl StainProfile {
    /// Checks unit columns, nonnegative H/E columns, conditioning and weight range.
    pub fn new(matrix: Mat3, wh: f64, we: f64) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::InvalidParameter(
                "stain matrix has non-finite entries",
            ));
        }
        for j in 0..3 {
            let col = matrix.column(j);
            if (linalg::norm(&col) - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidParameter(
                    "stain matrix columns must be unit vectors",
                ));
            }
            if j < 2 && col.iter().any(|v| *v < 0.0) {
                return Err(Error::InvalidParameter(
                    "H and E stain vectors must be nonnegative",
                ));
            }
        }
        for w in [wh, we] {
            if !(MIN_WEIGHT..=MAX_WEIGHT).contains(&w) {
                return Err(Error::InvalidParameter(
                    "stain weights must lie in [0.05, 20]",
                ));
            }
        }
        let condition = matrix.condition_number();
        if !(condition < MAX_CONDITION) {
            return Err(Error::SingularMatrix { condition });
        }
        Ok(Self { matrix, wh, we })
    }

    /// Profile from H and E directions (normalized here) with the residual
    /// column set to their unit cross product.
    pub fn from_stain_vectors(h: &Vec3, e: &Vec3, wh: f64, we: f64) -> Result<Self> {
        let h = linalg::normalized(h).ok_or(Error::InvalidParameter("zero H vector"))?;
        let e = linalg::normalized(e).ok_or(Error::InvalidParameter("zero E vector"))?;
        let r = residual_direction(&h, &e)?;
        Self::new(Mat3::from_columns(&h, &e, &r), wh, we)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    pub fn hematoxylin(&self) -> Vec3 {
        self.matrix.column(0)
    }

    pub fn eosin(&self) -> Vec3 {
        self.matrix.column(1)
    }

    pub fn residual(&self) -> Vec3 {
        self.matrix.column(2)
    }

    pub fn wh(&self) -> f64 {
        self.wh
    }

    pub fn we(&self) -> f64 {
        self.we
    }

    /// Diagonal of `W`.
    pub fn weights(&self) -> Vec3 {
        [self.wh, self.we, 1.0]
    }

    /// `M⁻¹`, guarded by the condition-number limit.
    pub fn deconvolution(&self) -> Result<Mat3> {
        let condition = self.matrix.condition_number();
        if !(condition < MAX_CONDITION) {
            return Err(Error::SingularMatrix { condition });
        }
        self.matrix
            .inverse()
            .ok_or(Error::SingularMatrix { condition })
    }

    /// `W · M⁻¹`, mapping a pixel's OD to its stain densities.
    pub fn separation_operator(&self) -> Result<Mat3> {
        Ok(Mat3::diag(&self.weights()) * self.deconvolution()?)
    }

    /// `M · W⁻¹`, mapping stain densities back to OD.
    pub fn composition_operator(&self) -> Mat3 {
        self.matrix * Mat3::diag(&[1.0 / self.wh, 1.0 / self.we, 1.0])
    }
}

fn residual_direction(h: &Vec3, e: &Vec3) -> Result<Vec3> {
    let angle_deg = linalg::angle_between(h, e).to_degrees();
    if !(angle_deg >= MIN_STAIN_ANGLE_DEG) {
        return Err(Error::DegenerateStains { angle_deg });
    }
    Ok(linalg::normalized(&linalg::cross(h, e)).expect("non-parallel stain vectors"))
}

/// Unconstrained parameterization of a profile: spherical angles of the H
/// and E directions plus log-domain weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcdParams {
    pub theta_h: f64,
    pub phi_h: f64,
    pub theta_e: f64,
    pub phi_e: f64,
    pub log_wh: f64,
    pub log_we: f64,
}

impl AcdParams {
    pub const LEN: usize = 6;

    pub fn from_vectors(h: &Vec3, e: &Vec3, wh: f64, we: f64) -> Result<Self> {
        let (theta_h, phi_h) =
            linalg::angles_from_vector(h).ok_or(Error::InvalidParameter("zero H vector"))?;
        let (theta_e, phi_e) =
            linalg::angles_from_vector(e).ok_or(Error::InvalidParameter("zero E vector"))?;
        if !(wh > 0.0 && we > 0.0) {
            return Err(Error::InvalidParameter("stain weights must be positive"));
        }
        Ok(Self {
            theta_h,
            phi_h,
            theta_e,
            phi_e,
            log_wh: libm::log(wh),
            log_we: libm::log(we),
        })
    }

    /// Ruifrok H&E directions with unit weights.
    pub fn ruifrok() -> Self {
        Self::from_vectors(&RUIFROK_HEMATOXYLIN, &RUIFROK_EOSIN, 1.0, 1.0)
            .expect("reference vectors are valid")
    }

    pub fn from_profile(profile: &StainProfile) -> Self {
        Self::from_vectors(
            &profile.hematoxylin(),
            &profile.eosin(),
            profile.wh(),
            profile.we(),
        )
        .expect("profile vectors are valid")
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.theta_h,
            self.phi_h,
            self.theta_e,
            self.phi_e,
            self.log_wh,
            self.log_we,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            theta_h: a[0],
            phi_h: a[1],
            theta_e: a[2],
            phi_e: a[3],
            log_wh: a[4],
            log_we: a[5],
        }
    }

    /// Clamps angles to `[0, π/2]` and weights to `[MIN_WEIGHT, MAX_WEIGHT]`.
    pub fn projected(&self) -> Self {
        let ang = |v: f64| v.clamp(0.0, FRAC_PI_2);
        let lw = |v: f64| v.clamp(libm::log(MIN_WEIGHT), libm::log(MAX_WEIGHT));
        Self {
            theta_h: ang(self.theta_h),
            phi_h: ang(self.phi_h),
            theta_e: ang(self.theta_e),
            phi_e: ang(self.phi_e),
            log_wh: lw(self.log_wh),
            log_we: lw(self.log_we),
        }
    }

    pub fn hematoxylin(&self) -> Vec3 {
        linalg::unit_from_angles(self.theta_h, self.phi_h)
    }

    pub fn eosin(&self) -> Vec3 {
        linalg::unit_from_angles(self.theta_e, self.phi_e)
    }
}

impl Default for AcdParams {
    fn default() -> Self {
        Self::ruifrok()
    }
}

/// Realizes the stain matrix for `params`.
pub fn build_matrix(params: &AcdParams) -> Result<StainProfile> {
    let angles = [params.theta_h, params.phi_h, params.theta_e, params.phi_e];
    if !angles.iter().all(|a| (0.0..=FRAC_PI_2).contains(a)) {
        return Err(Error::InvalidParameter(
            "stain angles must lie in [0, pi/2]",
        ));
    }
    let h = params.hematoxylin();
    let e = params.eosin();
    let r = residual_direction(&h, &e)?;
    StainProfile::new(
        Mat3::from_columns(&h, &e, &r),
        libm::exp(params.log_wh),
        libm::exp(params.log_we),
    )
}

/// Per-pixel stain densities `(h, e, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StainDensityMap {
    width: usize,
    height: usize,
    data: Vec<Vec3>,
}

impl StainDensityMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn densities(&self) -> &[Vec3] {
        &self.data
    }
}

/// `s = W · M⁻¹ · od` for every pixel.
pub fn separate(od: &OdImage, profile: &StainProfile) -> Result<StainDensityMap> {
    let op = profile.separation_operator()?;
    Ok(StainDensityMap {
        width: od.width(),
        height: od.height(),
        data: od.pixels().iter().map(|p| op.mul_vec(p)).collect(),
    })
}
