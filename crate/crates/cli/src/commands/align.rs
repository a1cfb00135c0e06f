//! `align`: estimate the SE(2) transform between an aerial and a
//! terrestrial cloud by multi-start NMI, plus the vertical offset.

use serde::Serialize;

use understory::align::{align_multistart, vertical_align, NmiConfig, SearchRegion};
use understory::fields::{
    aerial_likelihood, compute_chm, estimate_ground, extract_trunks, terrestrial_likelihood,
    ScaleSet, TrunkSet,
};
use understory::geom::PointCloud;
use understory::grid::GridField;
use understory::io::read_ply;

use crate::commands::require_file;
use crate::config::{AlignConfig, FieldsConfig, PipelineConfig};
use crate::{AlignArgs, AppError};

#[derive(Serialize)]
struct CandidateJson {
    tx: f64,
    ty: f64,
    psi_rad: f64,
    nmi: f64,
}

#[derive(Serialize)]
pub struct AlignmentJson {
    pub tx: f64,
    pub ty: f64,
    pub psi_rad: f64,
    pub z_offset: f64,
    pub nmi: f64,
    candidates: Vec<CandidateJson>,
}

/// Build the two normalized likelihood fields an alignment run consumes.
pub fn build_alignment_fields(
    aerial: &PointCloud,
    terrestrial: &PointCloud,
    f: &FieldsConfig,
) -> Result<(GridField, GridField, TrunkSet), AppError> {
    let ground_a = estimate_ground(aerial, f.ground_cell)?;
    let chm = compute_chm(aerial, &ground_a, f.chm_resolution)?;
    let scales = ScaleSet::new(f.scales.clone())?;
    let la = aerial_likelihood(&chm, &scales)?;

    let ground_t = estimate_ground(terrestrial, f.ground_cell)?;
    let trunks = extract_trunks(terrestrial, &ground_t);
    let extent = terrestrial
        .bounds_xy()
        .ok_or_else(|| AppError::runtime("terrestrial cloud is empty"))?;
    let lt = terrestrial_likelihood(&trunks, f.kde_bandwidth, f.field_resolution, extent)?;
    Ok((la, lt, trunks))
}

pub fn region_from_config(a: &AlignConfig) -> Result<SearchRegion, AppError> {
    SearchRegion::new(
        (a.tx_range[0], a.tx_range[1]),
        (a.ty_range[0], a.ty_range[1]),
        (
            a.psi_range_deg[0].to_radians(),
            a.psi_range_deg[1].to_radians(),
        ),
    )
    .map_err(|e| AppError::usage(e.to_string()))
}

pub fn run(args: AlignArgs, mut config: PipelineConfig) -> Result<(), AppError> {
    require_file(&args.aerial)?;
    require_file(&args.terrestrial)?;
    let a = &mut config.align;
    if let Some(v) = &args.tx_range {
        a.tx_range = [v[0], v[1]];
    }
    if let Some(v) = &args.ty_range {
        a.ty_range = [v[0], v[1]];
    }
    if let Some(v) = &args.psi_range_deg {
        a.psi_range_deg = [v[0], v[1]];
    }
    if let Some(v) = args.starts {
        a.starts = v;
    }
    if let Some(v) = args.seed {
        a.seed = v;
    }
    config.validate()?;

    let aerial = read_ply(&args.aerial)?;
    let terrestrial = read_ply(&args.terrestrial)?;
    let (la, lt, trunks) = build_alignment_fields(&aerial, &terrestrial, &config.fields)?;
    if trunks.is_empty() {
        return Err(AppError::runtime(
            "no trunks extracted from the terrestrial cloud",
        ));
    }

    let a = &config.align;
    let region = region_from_config(a)?;
    let nmi_cfg = NmiConfig {
        bins: a.bins,
        min_overlap_fraction: a.min_overlap_fraction,
    };
    let mut result = align_multistart(&la, &lt, &region, a.starts, &nmi_cfg, a.seed)?;
    result.z_offset = vertical_align(&aerial, &terrestrial, &result.theta)?;

    let json = AlignmentJson {
        tx: result.theta.tx,
        ty: result.theta.ty,
        psi_rad: result.theta.psi,
        z_offset: result.z_offset,
        nmi: result.objective,
        candidates: result
            .candidates
            .iter()
            .map(|(t, v)| CandidateJson {
                tx: t.tx,
                ty: t.ty,
                psi_rad: t.psi,
                nmi: *v,
            })
            .collect(),
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&json).expect("serializes"))?;
    println!(
        "alignment: tx {:.3} m, ty {:.3} m, psi {:.3} deg, z {:.3} m, NMI {:.4} -> {}",
        json.tx,
        json.ty,
        json.psi_rad.to_degrees(),
        json.z_offset,
        json.nmi,
        args.out.display()
    );
    Ok(())
}
