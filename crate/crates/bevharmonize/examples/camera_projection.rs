//! Pinhole projection basics: the 2.5D triple, intrinsic rescaling, and
//! ghost cameras.
//!
//! ```bash
//! cargo run --example camera_projection
//! ```

use bevharmonize::geometry::{
    box_ground_corners, project_point, rescale_intrinsics, Box3D, CameraExtrinsics,
    CameraIntrinsics,
};
use bevharmonize::Category;
use nalgebra::Vector3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a 1600x900 camera with 1000 px focals, principal point at center
    let intr = CameraIntrinsics::new(1000.0, 1000.0, 800.0, 450.0, 1600, 900)?;
    let extr = CameraExtrinsics::identity();

    println!(
        "projecting points through a {}x{} camera:",
        intr.width, intr.height
    );
    for p in [Vector3::new(0.0, 0.0, 10.0), Vector3::new(1.0, -2.0, 10.0)] {
        let h = project_point(&p, &intr, &extr)?;
        let (u, v) = h.pixel();
        println!(
            "  ({}, {}, {}) -> (ud, vd, d) = ({}, {}, {}) -> pixel ({u}, {v})",
            p.x, p.y, p.z, h.ud, h.vd, h.d
        );
    }

    // a point behind the camera is rejected, not silently projected
    let behind = project_point(&Vector3::new(0.0, 0.0, -5.0), &intr, &extr);
    println!("behind the camera: {behind:?}");

    // rescaling keeps the field of view; pixels scale by target/source
    let small = rescale_intrinsics(&intr, 704, 384)?;
    println!(
        "rescaled to {}x{}: fx {} -> {}, cx {} -> {}",
        small.width, small.height, intr.fx, small.fx, intr.cx, small.cx
    );
    let p = Vector3::new(3.0, 1.0, 20.0);
    let (u0, v0) = project_point(&p, &intr, &extr)?.pixel();
    let (u1, v1) = project_point(&p, &small, &extr)?.pixel();
    println!(
        "  pixel ({u0}, {v0}) -> ({u1}, {v1}), ratios ({}, {})",
        u1 / u0,
        v1 / v0
    );

    // ghost cameras are structural placeholders: representable, never projectable
    let ghost = CameraIntrinsics::ghost();
    println!(
        "ghost camera projection: {:?}",
        project_point(&p, &ghost, &extr)
    );

    // bottom-face corners feed the ground-plane fit
    let bbox = Box3D::new(
        Vector3::new(12.0, -1.0, 0.9),
        Vector3::new(4.6, 1.9, 1.8),
        0.4,
        Category::Vehicle,
        None,
    )?;
    println!("ground corners of a box at {:?}:", bbox.center);
    for corner in box_ground_corners(&bbox) {
        println!("  ({:.3}, {:.3}, {:.3})", corner.x, corner.y, corner.z);
    }
    Ok(())
}
