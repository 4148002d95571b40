//! Subcommand implementations. Every command computes its results first and
//! writes its files at the end.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lossbar::barcode::{
    bottleneck_distance, compute_barcode, to_diagram, to_score, BarcodeConfig, BarcodeFile, BarcodeMeta, BarcodeRun,
};
use lossbar::landscape::{make_mlp_field, MlpSpec};
use lossbar::morse::{build_complex, index_r_to_score, reduce, DiagramsFile, MorseMeta};
use lossbar::oracle::{grid_sample, sublevel_persistence};
use lossbar::pathopt::{optimize_path, save_path};
use lossbar::trainer::{sample_minima, Minimum};
use lossbar::ScalarField;
use serde::Serialize;

use crate::config::{Field, RunConfig};
use crate::error::{CliError, CliResult};
use crate::svg::{self, Bar, Panel};

const DEFAULT_MINIMA: usize = 10;
const COMPARE_MINIMA: usize = 40;

pub struct Context {
    pub config: RunConfig,
    /// Output directory from `--out`, if given.
    pub out: Option<PathBuf>,
}

impl Context {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.config.out_dir())
    }

    /// Output directory for commands that read a single input file.
    fn out_dir_near(&self, input: &Path) -> PathBuf {
        match (&self.out, &self.config.out) {
            (Some(o), _) => o.clone(),
            (None, Some(_)) => self.config.out_dir(),
            (None, None) => input.parent().map(Path::to_path_buf).unwrap_or_default(),
        }
    }
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| CliError::config(e.to_string()))
}

fn sample(config: &RunConfig, field: &Field, default_count: usize) -> CliResult<Vec<Minimum>> {
    let count = config.minima.count.unwrap_or(default_count);
    if count == 0 {
        return Err(CliError::config("minima.count must be at least 1"));
    }
    let scale = config.minima.init_scale.unwrap_or(field.default_scale);
    Ok(sample_minima(&*field.inner, count, config.seed, scale, &config.descent)?)
}

/// Minima from `explicit`, else from `minima.file`, else freshly sampled.
fn minima_for(ctx: &Context, field: &Field, explicit: Option<&Path>, default_count: usize) -> CliResult<Vec<Minimum>> {
    let file = explicit.map(Path::to_path_buf).or_else(|| ctx.config.minima.file.as_deref().map(|p| ctx.config.resolve(p)));
    let minima: Vec<Minimum> = match file {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::config(format!("cannot read minima file {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => sample(&ctx.config, field, default_count)?,
    };
    if minima.is_empty() {
        return Err(CliError::config("the minima list is empty"));
    }
    if let Some(m) = minima.iter().find(|m| m.params.dim() != field.inner.dim()) {
        return Err(CliError::config(format!(
            "minimum has {} parameters but the field has {}",
            m.params.dim(),
            field.inner.dim()
        )));
    }
    Ok(minima)
}

fn barcode_config(config: &RunConfig) -> BarcodeConfig {
    BarcodeConfig { path: config.path_config(), k_nearest_lower: config.barcode.k_nearest_lower }
}

/// Fails when some minimum has no surviving path to a lower one.
fn check_resolved(run: &BarcodeRun) -> CliResult<()> {
    for s in &run.skipped {
        log::warn!("path {} -> {} skipped: {}", s.from, s.to, s.reason);
    }
    if run.unresolved.is_empty() {
        Ok(())
    } else {
        Err(CliError::Divergence(format!(
            "every path from minima {:?} diverged ({} pairs skipped)",
            run.unresolved,
            run.skipped.len()
        )))
    }
}

fn barcode_panel(title: String, file: &BarcodeFile) -> Panel {
    let mut bars = vec![Bar { birth: file.essential.birth, death: f64::INFINITY }];
    bars.extend(file.segments.iter().map(|s| Bar { birth: s.birth, death: s.death }));
    Panel { title, bars }
}

pub fn minima(ctx: &Context) -> CliResult<()> {
    let field = ctx.config.field()?;
    let minima = sample(&ctx.config, &field, DEFAULT_MINIMA)?;
    let lo = minima.iter().map(|m| m.loss).fold(f64::INFINITY, f64::min);
    let hi = minima.iter().map(|m| m.loss).fold(f64::NEG_INFINITY, f64::max);
    let converged = minima.iter().filter(|m| m.converged).count();
    let path = write(&ctx.out_dir(), "minima.json", to_json(&minima)?)?;
    println!("{} minima of {}: loss in [{lo:.6}, {hi:.6}], {converged} converged", minima.len(), field.name);
    println!("wrote {}", path.display());
    Ok(())
}

pub fn path(ctx: &Context, minima_file: Option<&Path>) -> CliResult<()> {
    let field = ctx.config.field()?;
    let minima = minima_for(ctx, &field, minima_file, DEFAULT_MINIMA)?;
    let ends = &ctx.config.endpoints;
    let (Some(a), Some(b)) = (minima.get(ends.from), minima.get(ends.to)) else {
        return Err(CliError::config(format!(
            "endpoints {} and {} out of range for {} minima",
            ends.from,
            ends.to,
            minima.len()
        )));
    };
    let run = optimize_path(&*field.inner, &a.params, &b.params, &ctx.config.path_config())?;
    let mut trace = Vec::new();
    run.trace.write_csv(&mut trace)?;
    let dir = ctx.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::config(e.to_string()))?;
    save_path(&run.path, dir.join("path.json"))?;
    write(&dir, "path_trace.csv", trace)?;
    println!(
        "path {} -> {}: max loss {:.6} (segment {}, alpha {}), straight segment {:.6}",
        ends.from, ends.to, run.max_loss, run.location.segment, run.location.alpha, run.trace.initial_max_loss
    );
    println!("wrote {} and {}", dir.join("path.json").display(), dir.join("path_trace.csv").display());
    Ok(())
}

pub fn barcode(ctx: &Context, minima_file: Option<&Path>) -> CliResult<()> {
    let field = ctx.config.field()?;
    let minima = minima_for(ctx, &field, minima_file, DEFAULT_MINIMA)?;
    let config = barcode_config(&ctx.config);
    let run = compute_barcode(&minima, &*field.inner, &config)?;
    check_resolved(&run)?;
    let meta = BarcodeMeta {
        field: field.name.clone(),
        seed: ctx.config.seed,
        path_config: Some(config.path.clone()),
        skipped_pairs: run.skipped.clone(),
        duplicates: run.duplicates.clone(),
        unresolved: run.unresolved.clone(),
    };
    let file = BarcodeFile::from_barcode(&run.barcode, meta);
    let plot = svg::render(&format!("barcode of minima: {}", field.name), &[barcode_panel(field.name.clone(), &file)]);
    let dir = ctx.out_dir();
    let json = write(&dir, "barcode.json", file.to_json()? + "\n")?;
    let svg_path = write(&dir, "barcode.svg", plot)?;
    println!(
        "essential [{:.6}, inf), {} finite segments, TO-score {:.6}",
        run.barcode.essential().birth,
        run.barcode.segments().len(),
        to_score(&run.barcode)
    );
    println!("wrote {} and {}", json.display(), svg_path.display());
    Ok(())
}

pub fn toscore(ctx: &Context, input: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", input.display())))?;
    let file: BarcodeFile =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", input.display())))?;
    let barcode = file.to_barcode().map_err(|e| CliError::config(format!("{}: {e}", input.display())))?;
    let score = to_score(&barcode);
    write(&ctx.out_dir_near(input), "to_score.json", to_json(&serde_json::json!({ "to_score": score }))?)?;
    println!("{score:.6}");
    Ok(())
}

pub fn morse(ctx: &Context, minima_file: Option<&Path>) -> CliResult<()> {
    let field = ctx.config.field()?;
    let minima = minima_for(ctx, &field, minima_file, DEFAULT_MINIMA)?;
    let config = ctx.config.morse_config();
    let r_max = ctx.config.morse.r_max;
    let complex = build_complex(&minima, &*field.inner, r_max, &config)?;
    let diagrams = reduce(&complex)?;
    let meta = MorseMeta {
        field: field.name.clone(),
        seed: ctx.config.seed,
        minimum_ids: complex.minimum_ids().to_vec(),
        clamped: complex.clamped(),
        config: Some(config),
    };
    let file = DiagramsFile::new(&diagrams, meta);
    let path = write(&ctx.out_dir(), "diagrams.json", to_json(&file)?)?;
    for (r, d) in diagrams.iter().enumerate() {
        println!(
            "index {r}: {} essential, {} finite, score {:.6}",
            d.essential.len(),
            d.finite.len(),
            index_r_to_score(&diagrams, r)?
        );
    }
    if complex.clamped() > 0 {
        println!("{} simplices raised to the max of their faces", complex.clamped());
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct CompareReport {
    field: String,
    seed: u64,
    minima: usize,
    resolution: usize,
    distance: f64,
    tolerance: f64,
    pass: bool,
}

pub fn compare(ctx: &Context) -> CliResult<()> {
    let field = ctx.config.field()?;
    let Some(builtin) = &field.builtin else {
        return Err(CliError::config("compare needs a builtin field"));
    };
    let dim = field.inner.dim();
    if dim > 2 {
        return Err(CliError::config(format!("compare needs a 1-D or 2-D field, {} is {dim}-D", field.name)));
    }
    let minima = minima_for(ctx, &field, None, COMPARE_MINIMA)?;
    let run = compute_barcode(&minima, &*field.inner, &barcode_config(&ctx.config))?;
    check_resolved(&run)?;
    let resolution = ctx.config.compare.resolution.unwrap_or(if dim == 1 { 4097 } else { 512 });
    let grid = grid_sample(builtin, &builtin.default_box(), &vec![resolution; dim])?;
    let oracle = &sublevel_persistence(&grid)[0];
    let distance = bottleneck_distance(&to_diagram(&run.barcode), oracle);
    let tolerance = ctx.config.compare.tolerance;
    let pass = distance < tolerance;
    let report = CompareReport {
        field: field.name.clone(),
        seed: field.seed,
        minima: minima.len(),
        resolution,
        distance,
        tolerance,
        pass,
    };
    write(&ctx.out_dir(), "compare.json", to_json(&report)?)?;
    println!(
        "{}: bottleneck distance {distance:.6} (tolerance {tolerance}) {}",
        field.name,
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!("distance {distance:.6} is not below {tolerance}")))
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(xs[n / 2]),
        _ => Some((xs[n / 2 - 1] + xs[n / 2]) / 2.0),
    }
}

pub fn depth_study(ctx: &Context) -> CliResult<()> {
    let study = ctx.config.depth_study.as_ref().ok_or_else(|| CliError::config("missing [depth_study] section"))?;
    if study.layers.is_empty() {
        return Err(CliError::config("depth_study.layers is empty"));
    }
    let data = Arc::new(ctx.config.dataset(&study.dataset, &study.two_moons, "depth_study.dataset")?);
    let mut specs = study.layers.clone();
    specs.sort_by_key(Vec::len);

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["spec", "minimum_id", "birth", "death"]).map_err(|e| CliError::config(e.to_string()))?;
    let mut panels = Vec::new();
    let mut summary = Vec::new();
    for layers in specs {
        let label = layers.iter().map(usize::to_string).collect::<Vec<_>>().join("-");
        let spec = MlpSpec::new(layers, study.activation)?;
        let field = make_mlp_field(spec, data.clone(), None)?;
        let minima = sample_minima(&field, study.count, ctx.config.seed, study.init_scale, &ctx.config.descent)?;
        let run = compute_barcode(&minima, &field, &barcode_config(&ctx.config))?;
        check_resolved(&run)?;
        let essential = run.barcode.essential();
        let mut rows = vec![(essential.minimum_id, essential.birth, f64::INFINITY)];
        rows.extend(run.barcode.segments().iter().map(|s| (s.minimum_id, s.birth, s.death)));
        for (id, birth, death) in &rows {
            let death = if death.is_finite() { death.to_string() } else { "inf".into() };
            csv.write_record([label.clone(), id.to_string(), birth.to_string(), death])
                .map_err(|e| CliError::config(e.to_string()))?;
        }
        let deaths: Vec<f64> = run.barcode.segments().iter().map(|s| s.death).collect();
        summary.push((label.clone(), deaths.len(), median(deaths)));
        panels.push(Panel {
            title: label,
            bars: rows.iter().map(|&(_, birth, death)| Bar { birth, death }).collect(),
        });
    }
    let bytes = csv.into_inner().map_err(|e| CliError::config(e.to_string()))?;
    let dir = ctx.out_dir();
    let csv_path = write(&dir, "depth_study.csv", bytes)?;
    let svg_path = write(&dir, "depth_study.svg", svg::render("barcodes of minima by architecture", &panels))?;
    for (label, n, m) in summary {
        match m {
            Some(m) => println!("{label}: {n} finite segments, median death {m:.6e}"),
            None => println!("{label}: no finite segments"),
        }
    }
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    Ok(())
}

pub fn plot(ctx: &Context, input: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", input.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", input.display())))?;
    let bad = |e: serde_json::Error| CliError::config(format!("{}: {e}", input.display()));
    let (title, panels) = if value.get("diagrams").is_some() {
        let file: DiagramsFile = serde_json::from_value(value).map_err(bad)?;
        file.to_diagrams().map_err(|e| CliError::config(format!("{}: {e}", input.display())))?;
        let mut sorted = file.diagrams.clone();
        sorted.sort_by_key(|d| d.dimension);
        let panels = sorted
            .iter()
            .map(|d| {
                let mut bars: Vec<Bar> = d.essential.iter().map(|e| Bar { birth: e.birth, death: f64::INFINITY }).collect();
                bars.extend(d.segments.iter().map(|s| Bar { birth: s.birth, death: s.death }));
                Panel { title: format!("index {}", d.dimension), bars }
            })
            .collect();
        (format!("index-r barcodes: {}", file.meta.field), panels)
    } else {
        let file: BarcodeFile = serde_json::from_value(value).map_err(bad)?;
        file.to_barcode().map_err(|e| CliError::config(format!("{}: {e}", input.display())))?;
        (format!("barcode of minima: {}", file.meta.field), vec![barcode_panel(file.meta.field.clone(), &file)])
    };
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let path = write(&ctx.out_dir_near(input), &format!("{stem}.svg"), svg::render(&title, &panels))?;
    println!("wrote {}", path.display());
    Ok(())
}
