use anyhow::Result;
use demandcast_core::synthgen::{generate, SynthConfig};

use crate::run::RunContext;

pub fn synth(ctx: &RunContext) -> Result<()> {
    let mut cfg = SynthConfig::from_kv(&ctx.kv)?;
    cfg.seed = ctx.master_seed;
    cfg.validate()?;
    ctx.ensure_out_dir()?;
    let files = generate(&cfg, &ctx.out_dir)?;
    eprintln!(
        "generated {} products x {} warehouses over {} months (seed {})",
        cfg.n_products, cfg.n_warehouses, cfg.months, cfg.seed
    );
    eprintln!("  {}", files.sales.display());
    eprintln!("  {}", files.holidays.display());
    eprintln!("  {}", files.metadata.display());
    Ok(())
}
