//! Pinhole camera, projection conventions, and per-Gaussian frame transforms.
//!
//! Conventions used throughout the crate:
//!
//! * View space is right-handed with the camera looking along `+z`.
//! * Pixel `(i, j)` has continuous center `(i + 0.5, j + 0.5)`; `x` grows
//!   with the image column, `y` with the image row.
//! * The combined transform `M = M_vp * P * V` maps world homogeneous points
//!   so that perspective division yields pixel coordinates; `M_vp` maps NDC
//!   `[-1, 1]` to `[0, width] x [0, height]`.
//! * `P` only has to be an invertible perspective map for the plane-transform
//!   machinery to be exact; its depth row here stores inverse depth.

use crate::gaussian::ValidationError;
use crate::math::{Mat3, Mat4, Vec3};

/// Pinhole camera: intrinsics, rigid world-to-view transform, near plane.
#[derive(Clone, Debug)]
pub struct Camera {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub near: f64,
    pub world_to_view: Mat4,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        width: u32,
        height: u32,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        near: f64,
        world_to_view: Mat4,
    ) -> Result<Self, ValidationError> {
        if width == 0 || height == 0 {
            return Err(ValidationError::NonFinite("viewport"));
        }
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(ValidationError::NonFinite("focal length"));
        }
        if !(near > 0.0 && near.is_finite()) {
            return Err(ValidationError::NonFinite("near plane"));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(ValidationError::NonFinite("principal point"));
        }
        let r = world_to_view.linear();
        let gram = r.transpose() * r;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (gram.m[i][j] - expect).abs() > 1e-6 {
                    return Err(ValidationError::NonFinite("world_to_view rotation"));
                }
            }
        }
        if r.determinant() < 0.0 {
            return Err(ValidationError::NonFinite("world_to_view handedness"));
        }
        let bottom = world_to_view.row(3);
        if bottom.x != 0.0 || bottom.y != 0.0 || bottom.z != 0.0 || bottom.w != 1.0 {
            return Err(ValidationError::NonFinite("world_to_view bottom row"));
        }
        Ok(Camera { width, height, fx, fy, cx, cy, near, world_to_view })
    }

    /// Camera placed at `eye` looking toward `target`, image top toward `up`.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        width: u32,
        height: u32,
        fx: f64,
        fy: f64,
        near: f64,
        eye: Vec3,
        target: Vec3,
        up: Vec3,
    ) -> Result<Self, ValidationError> {
        let forward = (target - eye)
            .try_normalized()
            .ok_or(ValidationError::NonFinite("look_at direction"))?;
        let right = (-up)
            .cross(forward)
            .try_normalized()
            .ok_or(ValidationError::NonFinite("look_at up vector"))?;
        let down = forward.cross(right);
        let r = Mat3::from_rows(
            [right.x, right.y, right.z],
            [down.x, down.y, down.z],
            [forward.x, forward.y, forward.z],
        );
        let t = -r.mul_vec(eye);
        Camera::new(
            width,
            height,
            fx,
            fy,
            width as f64 * 0.5,
            height as f64 * 0.5,
            near,
            Mat4::from_linear_translation(&r, t),
        )
    }

    pub fn view_matrix(&self) -> &Mat4 {
        &self.world_to_view
    }

    /// Rotation block of the world-to-view transform.
    pub fn rotation(&self) -> Mat3 {
        self.world_to_view.linear()
    }

    /// Camera center in world coordinates.
    pub fn center_world(&self) -> Vec3 {
        let r = self.rotation();
        -(r.transpose().mul_vec(self.world_to_view.translation()))
    }

    /// Perspective matrix `P` mapping view space to NDC (clip `w` = view `z`).
    pub fn projection_matrix(&self) -> Mat4 {
        let w = self.width as f64;
        let h = self.height as f64;
        Mat4::from_rows([
            [2.0 * self.fx / w, 0.0, (2.0 * self.cx - w) / w, 0.0],
            [0.0, 2.0 * self.fy / h, (2.0 * self.cy - h) / h, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0],
        ])
    }

    /// Viewport matrix `M_vp` mapping NDC x/y to pixel coordinates.
    pub fn viewport_matrix(&self) -> Mat4 {
        let w = self.width as f64;
        let h = self.height as f64;
        Mat4::from_rows([
            [w * 0.5, 0.0, 0.0, w * 0.5],
            [0.0, h * 0.5, 0.0, h * 0.5],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }

    /// `M_vp * P`: view space to pixel coordinates after perspective division.
    pub fn pixel_projection(&self) -> Mat4 {
        self.viewport_matrix() * self.projection_matrix()
    }

    /// Combined transform `T' = M_vp * P * V * T` for a Gaussian-to-world `T`.
    pub fn combined_transform(&self, t_world: &Mat4) -> Mat4 {
        self.pixel_projection() * (self.world_to_view * *t_world)
    }

    pub fn view_point(&self, world: Vec3) -> Vec3 {
        self.world_to_view.transform_point(world)
    }

    /// Pixel coordinates of a view-space point in front of the camera.
    pub fn project_view(&self, view: Vec3) -> Option<[f64; 2]> {
        if view.z > 0.0 {
            Some([
                self.fx * view.x / view.z + self.cx,
                self.fy * view.y / view.z + self.cy,
            ])
        } else {
            None
        }
    }

    pub fn project(&self, world: Vec3) -> Option<[f64; 2]> {
        self.project_view(self.view_point(world))
    }
}

/// Per-frame transforms of one Gaussian under one camera, built with whatever
/// scales the caller provides (typically the filtered standard deviations).
#[derive(Clone, Debug)]
pub struct GaussianFrame {
    /// `M_vp * P * V * T`; rows feed the pixel-plane pullbacks.
    pub t_prime: Mat4,
    /// `V * T`: Gaussian unit space to view space.
    pub t_view: Mat4,
    /// Inverse of `t_view`, built from the factored parts.
    pub t_view_inv: Mat4,
    /// Gaussian mean in view space.
    pub mean_view: Vec3,
    /// Pixel coordinates of the mean; `None` when the mean is behind the camera.
    pub mean_screen: Option<[f64; 2]>,
}

impl GaussianFrame {
    pub fn new(camera: &Camera, rotation: &Mat3, scale_std: Vec3, mean: Vec3) -> Self {
        let t_world = Mat4::from_linear_translation(&rotation.mul_diag(scale_std), mean);
        let t_view = *camera.view_matrix() * t_world;
        // A = R_view * R * S  =>  A^-1 = S^-1 * R^T * R_view^T
        let rv_r = camera.rotation() * *rotation;
        let a_inv = Mat3::from_diagonal(Vec3::new(
            1.0 / scale_std.x,
            1.0 / scale_std.y,
            1.0 / scale_std.z,
        )) * rv_r.transpose();
        let b = t_view.translation();
        let t_view_inv = Mat4::from_linear_translation(&a_inv, -a_inv.mul_vec(b));
        let t_prime = camera.pixel_projection() * t_view;
        let mean_view = b;
        let mean_screen = camera.project_view(mean_view);
        GaussianFrame { t_prime, t_view, t_view_inv, mean_view, mean_screen }
    }

    /// Unit-space position of the camera center, i.e. `(V T)^-1 * origin`.
    pub fn camera_in_unit_space(&self) -> Vec3 {
        self.t_view_inv.translation()
    }

    /// View-space depth of a unit-space point.
    pub fn view_depth(&self, unit: Vec3) -> f64 {
        self.t_view.row(2).dot(unit.extend(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::math::{Quat, Vec4};

    pub(crate) fn simple_camera(width: u32, height: u32, f: f64) -> Camera {
        Camera::new(
            width,
            height,
            f,
            f,
            width as f64 * 0.5,
            height as f64 * 0.5,
            0.01,
            Mat4::IDENTITY,
        )
        .unwrap()
    }

    #[test]
    fn principal_ray_projects_to_principal_point() {
        let cam = simple_camera(640, 480, 500.0);
        let t_prime = cam.combined_transform(&Mat4::IDENTITY);
        for z in [0.5, 1.0, 7.0] {
            let clip = t_prime.mul_vec4(Vec4::new(0.0, 0.0, z, 1.0));
            assert_relative_eq!(clip.x / clip.w, cam.cx, epsilon = 1e-12);
            assert_relative_eq!(clip.y / clip.w, cam.cy, epsilon = 1e-12);
            assert_relative_eq!(clip.w, z, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_origin_projects_like_pinhole_mean() {
        let cam = Camera::look_at(
            320,
            240,
            260.0,
            250.0,
            0.01,
            Vec3::new(1.0, -2.0, -4.0),
            Vec3::ZERO,
            Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let mean = Vec3::new(0.3, 0.1, 0.4);
        let g = crate::gaussian::Gaussian::new(
            mean,
            Vec3::new(0.2, 0.5, 0.1),
            Quat::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.9),
            0.7,
            crate::gaussian::ShCoeffs::from_base_color([0.5; 3]),
            f64::INFINITY,
        )
        .unwrap();
        let t_prime = cam.combined_transform(&g.to_world(None));
        let clip = t_prime.mul_vec4(Vec4::new(0.0, 0.0, 0.0, 1.0));
        let direct = cam.project(mean).unwrap();
        assert_relative_eq!(clip.x / clip.w, direct[0], epsilon = 1e-9);
        assert_relative_eq!(clip.y / clip.w, direct[1], epsilon = 1e-9);
    }

    #[test]
    fn half_turn_roll_mirrors_pixels() {
        let cam = simple_camera(512, 512, 400.0);
        let roll = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::PI).to_mat3();
        let rolled = Camera::new(
            cam.width,
            cam.height,
            cam.fx,
            cam.fy,
            cam.cx,
            cam.cy,
            cam.near,
            Mat4::from_linear_translation(&roll, Vec3::ZERO) * cam.world_to_view,
        )
        .unwrap();
        let p = Vec3::new(0.4, -0.2, 3.0);
        let a = cam.project(p).unwrap();
        let b = rolled.project(p).unwrap();
        assert_relative_eq!(b[0], cam.width as f64 - a[0], epsilon = 1e-9);
        assert_relative_eq!(b[1], cam.height as f64 - a[1], epsilon = 1e-9);
    }

    #[test]
    fn look_at_from_minus_z_sees_origin_at_depth() {
        let cam = Camera::look_at(
            64,
            64,
            64.0,
            64.0,
            0.01,
            Vec3::new(0.0, 0.0, -5.0),
            Vec3::ZERO,
            Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let v = cam.view_point(Vec3::ZERO);
        assert_relative_eq!(v.z, 5.0, epsilon = 1e-12);
        assert_relative_eq!(v.x, 0.0, epsilon = 1e-12);
        let px = cam.project(Vec3::ZERO).unwrap();
        assert_relative_eq!(px[0], 32.0, epsilon = 1e-12);
        assert_relative_eq!(px[1], 32.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_orthonormal_view() {
        let mut m = Mat4::IDENTITY;
        m.m[0][0] = 2.0;
        assert!(Camera::new(64, 64, 60.0, 60.0, 32.0, 32.0, 0.01, m).is_err());
    }

    #[test]
    fn frame_inverse_matches_generic_inverse() {
        let cam = Camera::look_at(
            128,
            96,
            100.0,
            110.0,
            0.05,
            Vec3::new(2.0, 1.0, -3.0),
            Vec3::new(0.0, 0.5, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let rot = Quat::from_axis_angle(Vec3::new(0.2, 1.0, -0.5), 1.1).to_mat3();
        let frame = GaussianFrame::new(&cam, &rot, Vec3::new(0.4, 0.02, 1.5), Vec3::new(0.1, 0.2, 0.3));
        let generic = frame.t_view.inverse().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(frame.t_view_inv.m[i][j], generic.m[i][j], max_relative = 1e-9, epsilon = 1e-9);
            }
        }
        // Unit-space camera position maps back to the view-space origin.
        let cam_unit = frame.camera_in_unit_space();
        let back = frame.t_view.transform_point(cam_unit);
        assert_relative_eq!(back.norm(), 0.0, epsilon = 1e-9);
    }
}
