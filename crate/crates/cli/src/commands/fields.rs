//! `fields`: build and dump the likelihood fields for a cloud pair.

use std::io::Write;

use understory::fields::{
    aerial_likelihood, compute_chm, estimate_ground, extract_trunks, terrestrial_likelihood,
    ScaleSet,
};
use understory::io::read_ply;

use crate::commands::{ensure_dir, require_file};
use crate::config::PipelineConfig;
use crate::{AppError, FieldsArgs};

pub fn run(args: FieldsArgs, config: PipelineConfig) -> Result<(), AppError> {
    require_file(&args.aerial)?;
    require_file(&args.terrestrial)?;
    ensure_dir(&args.out)?;
    let f = &config.fields;

    let aerial = read_ply(&args.aerial)?;
    let terrestrial = read_ply(&args.terrestrial)?;

    let ground_a = estimate_ground(&aerial, f.ground_cell)?;
    let chm = compute_chm(&aerial, &ground_a, f.chm_resolution)?;
    let scales = ScaleSet::new(f.scales.clone())?;
    let la = aerial_likelihood(&chm, &scales)?;

    let ground_t = estimate_ground(&terrestrial, f.ground_cell)?;
    let trunks = extract_trunks(&terrestrial, &ground_t);
    let extent = terrestrial
        .bounds_xy()
        .ok_or_else(|| AppError::runtime("terrestrial cloud is empty"))?;
    let lt = terrestrial_likelihood(&trunks, f.kde_bandwidth, f.field_resolution, extent)?;

    let out = |name: &str| args.out.join(name);
    ground_a.write_binary(&out("ground_aerial.bin"))?;
    chm.write_binary(&out("chm.bin"))?;
    la.write_binary(&out("aerial_likelihood.bin"))?;
    ground_t.write_binary(&out("ground_terrestrial.bin"))?;
    lt.write_binary(&out("terrestrial_likelihood.bin"))?;
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(out("trunks.csv"))?);
        writeln!(w, "x,y")?;
        for p in &trunks.positions {
            writeln!(w, "{},{}", p.x, p.y)?;
        }
    }
    println!(
        "fields: CHM {}x{} at {} m, {} trunks -> {}",
        chm.width,
        chm.height,
        chm.resolution,
        trunks.len(),
        args.out.display()
    );
    Ok(())
}
