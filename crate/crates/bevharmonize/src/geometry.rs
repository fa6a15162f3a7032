//! Pinhole camera geometry and 3D boxes.
//!
//! All poses use a single convention: extrinsics transform ego-frame
//! points into the camera frame (`p_cam = R * p_ego + t`), with the
//! camera looking along +z, x to the right, y down. The ego frame is
//! x forward, y left, z up, with boxes annotated in it.
//!
//! Projection is kept in homogeneous 2.5D form `(ud, vd, d)` where
//! `(ud/d, vd/d)` are pixel coordinates and `d` is depth along the
//! optical axis; downstream plane fitting works directly on the triple.

use nalgebra::{Matrix3, Vector2, Vector3};
use thiserror::Error;

use crate::category::Category;

/// Points closer than this to the image plane are treated as behind the camera.
pub const MIN_PROJECTION_DEPTH_M: f64 = 1e-6;

const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid focal lengths fx={fx}, fy={fy}: must be finite, non-negative, and zero only together (ghost)")]
    InvalidFocal { fx: f64, fy: f64 },
    #[error("rotation is not orthonormal: max |R^T R - I| entry = {deviation:e}")]
    NonOrthonormalRotation { deviation: f64 },
    #[error("rotation is not proper: det = {det}")]
    ImproperRotation { det: f64 },
    #[error("cannot project through a ghost camera (fx = fy = 0)")]
    GhostCameraProjection,
    #[error("point is behind the camera: depth {depth} m <= {MIN_PROJECTION_DEPTH_M} m")]
    BehindCamera { depth: f64 },
    #[error("cannot rescale: {what} is zero (width={width}, height={height})")]
    ZeroDimension {
        what: &'static str,
        width: u32,
        height: u32,
    },
    #[error("box size must be positive and finite, got ({length}, {width}, {height})")]
    InvalidBoxSize {
        length: f64,
        width: f64,
        height: f64,
    },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error("duplicate camera name '{name}' in rig")]
    DuplicateCameraName { name: String },
}

/// Pinhole intrinsics. A ghost camera is encoded as `fx == fy == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        if !(fx.is_finite() && fy.is_finite())
            || fx < 0.0
            || fy < 0.0
            || ((fx == 0.0) != (fy == 0.0))
        {
            return Err(GeometryError::InvalidFocal { fx, fy });
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(GeometryError::NonFinite {
                what: "principal point",
            });
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Placeholder camera used to pad rigs: zero focals, zero principal
    /// point, zero image size.
    pub fn ghost() -> Self {
        Self {
            fx: 0.0,
            fy: 0.0,
            cx: 0.0,
            cy: 0.0,
            width: 0,
            height: 0,
        }
    }

    pub fn is_ghost(&self) -> bool {
        self.fx == 0.0 && self.fy == 0.0
    }

    /// Same camera with the principal point moved to the origin, so that
    /// projected pixel coordinates come out principal-point-centered.
    pub fn centered(&self) -> Self {
        Self {
            cx: 0.0,
            cy: 0.0,
            ..self.clone()
        }
    }
}

/// Rigid ego-to-camera transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraExtrinsics {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraExtrinsics {
    /// Validates orthonormality and right-handedness of `rotation`.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if rotation.iter().any(|v| !v.is_finite()) || translation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite { what: "extrinsics" });
        }
        let gram = rotation.transpose() * rotation;
        let deviation = (gram - Matrix3::identity()).abs().max();
        if deviation > ROTATION_TOL {
            return Err(GeometryError::NonOrthonormalRotation { deviation });
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(GeometryError::ImproperRotation { det });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Ego-frame point into the camera frame.
    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// Oriented 3D box in the ego frame.
///
/// `size` is (length, width, height): extent along the box's own x-axis
/// (rotated by `yaw` about vertical), its y-axis, and vertical.
#[derive(Debug, Clone, PartialEq)]
pub struct Box3D {
    pub center: Vector3<f64>,
    pub size: Vector3<f64>,
    /// Heading in radians, normalized to (-pi, pi].
    pub yaw: f64,
    pub category: Category,
    /// BEV velocity in m/s, when the source dataset provides one.
    pub velocity: Option<Vector2<f64>>,
}

impl Box3D {
    pub fn new(
        center: Vector3<f64>,
        size: Vector3<f64>,
        yaw: f64,
        category: Category,
        velocity: Option<Vector2<f64>>,
    ) -> Result<Self, GeometryError> {
        if size.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(GeometryError::InvalidBoxSize {
                length: size.x,
                width: size.y,
                height: size.z,
            });
        }
        if center.iter().any(|v| !v.is_finite()) || !yaw.is_finite() {
            return Err(GeometryError::NonFinite {
                what: "box center or yaw",
            });
        }
        if let Some(v) = &velocity {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(GeometryError::NonFinite {
                    what: "box velocity",
                });
            }
        }
        Ok(Self {
            center,
            size,
            yaw: wrap_angle(yaw),
            category,
            velocity,
        })
    }

    pub fn length(&self) -> f64 {
        self.size.x
    }

    pub fn width(&self) -> f64 {
        self.size.y
    }

    pub fn height(&self) -> f64 {
        self.size.z
    }

    pub fn volume(&self) -> f64 {
        self.size.x * self.size.y * self.size.z
    }
}

/// Normalize an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

/// One named view of a rig.
#[derive(Debug, Clone, PartialEq)]
pub struct RigCamera {
    pub name: String,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
}

/// Ordered collection of cameras with unique names.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    cameras: Vec<RigCamera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<RigCamera>) -> Result<Self, GeometryError> {
        for (i, cam) in cameras.iter().enumerate() {
            if cameras[..i].iter().any(|c| c.name == cam.name) {
                return Err(GeometryError::DuplicateCameraName {
                    name: cam.name.clone(),
                });
            }
        }
        Ok(Self { cameras })
    }

    pub fn cameras(&self) -> &[RigCamera] {
        &self.cameras
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn camera(&self, name: &str) -> Option<&RigCamera> {
        self.cameras.iter().find(|c| c.name == name)
    }

    /// Appends a camera, re-checking name uniqueness.
    pub fn push(&mut self, camera: RigCamera) -> Result<(), GeometryError> {
        if self.camera(&camera.name).is_some() {
            return Err(GeometryError::DuplicateCameraName { name: camera.name });
        }
        self.cameras.push(camera);
        Ok(())
    }
}

/// Homogeneous image point: `(ud/d, vd/d)` is the pixel, `d` the depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point25D {
    pub ud: f64,
    pub vd: f64,
    pub d: f64,
}

impl Point25D {
    /// Dehomogenized pixel coordinates (u, v).
    pub fn pixel(&self) -> (f64, f64) {
        (self.ud / self.d, self.vd / self.d)
    }
}

/// Project an ego-frame point through a camera into 2.5D.
pub fn project_point(
    p: &Vector3<f64>,
    intrinsics: &CameraIntrinsics,
    extrinsics: &CameraExtrinsics,
) -> Result<Point25D, GeometryError> {
    if intrinsics.is_ghost() {
        return Err(GeometryError::GhostCameraProjection);
    }
    let q = extrinsics.to_camera(p);
    if q.z <= MIN_PROJECTION_DEPTH_M {
        return Err(GeometryError::BehindCamera { depth: q.z });
    }
    Ok(Point25D {
        ud: intrinsics.fx * q.x + intrinsics.cx * q.z,
        vd: intrinsics.fy * q.y + intrinsics.cy * q.z,
        d: q.z,
    })
}

/// The four bottom-face corners of a box, in ego coordinates.
///
/// Corners are returned in footprint order (a simple quadrilateral), all
/// at `center.z - height/2`.
pub fn box_ground_corners(b: &Box3D) -> [Vector3<f64>; 4] {
    let hl = b.size.x / 2.0;
    let hw = b.size.y / 2.0;
    let z = b.center.z - b.size.z / 2.0;
    let (s, c) = b.yaw.sin_cos();
    let corner = |dx: f64, dy: f64| {
        Vector3::new(
            b.center.x + c * dx - s * dy,
            b.center.y + s * dx + c * dy,
            z,
        )
    };
    [
        corner(hl, hw),
        corner(hl, -hw),
        corner(-hl, -hw),
        corner(-hl, hw),
    ]
}

/// Rescale intrinsics to a new image size, preserving the field of view.
///
/// Pixel coordinates of any projected point scale by exactly
/// `target_w / width` and `target_h / height`. Ghost cameras pass through
/// with only their image size updated.
pub fn rescale_intrinsics(
    intrinsics: &CameraIntrinsics,
    target_w: u32,
    target_h: u32,
) -> Result<CameraIntrinsics, GeometryError> {
    if target_w == 0 || target_h == 0 {
        return Err(GeometryError::ZeroDimension {
            what: "target size",
            width: target_w,
            height: target_h,
        });
    }
    if intrinsics.is_ghost() {
        return Ok(CameraIntrinsics {
            width: target_w,
            height: target_h,
            ..intrinsics.clone()
        });
    }
    if intrinsics.width == 0 || intrinsics.height == 0 {
        return Err(GeometryError::ZeroDimension {
            what: "source size",
            width: intrinsics.width,
            height: intrinsics.height,
        });
    }
    let sx = f64::from(target_w) / f64::from(intrinsics.width);
    let sy = f64::from(target_h) / f64::from(intrinsics.height);
    Ok(CameraIntrinsics {
        fx: intrinsics.fx * sx,
        fy: intrinsics.fy * sy,
        cx: intrinsics.cx * sx,
        cy: intrinsics.cy * sy,
        width: target_w,
        height: target_h,
    })
}
