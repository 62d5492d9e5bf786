//! Writes the pseudospectrum boundary of a two-delay system as a contour
//! file (`#` metadata header, then `polyline_id,re,im` rows), ready for
//! any plotting tool.
//!
//! ```text
//! cargo run --release --example contour_export -- contour.csv
//! ```

use tds_psa::cli::{self, ComputeOptions, RegionFlags, SystemFile};

const SYSTEM: &str = r#"{
  "name": "two-delay",
  "n": 2,
  "delays": [0.5, 1.0],
  "A0": [[-1.0, 0.5], [0.3, -2.0]],
  "A": [[[0.4, 0.0], [0.2, -0.3]], [[-0.2, 0.1], [0.0, 0.5]]],
  "weights": [1, 1, "inf"],
  "epsilon": 0.2
}"#;

fn main() -> Result<(), cli::CliError> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "contour.csv".into());
    let file = SystemFile::parse(SYSTEM)?;
    let region = RegionFlags {
        re_min: Some(-3.0),
        re_max: Some(1.0),
        im_min: Some(-4.0),
        im_max: Some(4.0),
        n_re: Some(240),
        n_im: Some(480),
    };
    let contour = cli::cmd_contour(&file, &region, &ComputeOptions::default())?;
    std::fs::write(&out, contour.to_text()).map_err(|e| cli::CliError::Io {
        path: out.clone().into(),
        message: e.to_string(),
    })?;
    println!(
        "{} polylines, {} vertices, alpha_eps = {:?}, written to {out}",
        contour.polyline_count(),
        contour.rows.len(),
        contour.alpha_eps
    );
    Ok(())
}
