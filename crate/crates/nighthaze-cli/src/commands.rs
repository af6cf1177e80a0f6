use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use nighthaze::config::PipelineConfig;
use nighthaze::error::{Error, Result};
use nighthaze::image::PlanarImage;
use nighthaze::metrics::{psnr, rmse, ssim, visual_measure, EvalReport};
use nighthaze::io as imgio;
use nighthaze::pipeline::{self, PipelineArtifacts};
use nighthaze::synth::{generate, noise_image, SynthConfig};

use crate::manifest::{manifest_path, Manifest};
use crate::{Cli, PipelineOverrides};

/// Attaches the file name to I/O and codec errors so failures name the file.
fn with_path<T>(result: Result<T>, path: &Path) -> Result<T> {
    result.map_err(|err| match err {
        Error::Io(e) => Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )),
        Error::Codec(e) => Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))),
        other => other,
    })
}

fn load(path: &Path) -> Result<PlanarImage> {
    with_path(imgio::load_image(path), path)
}

fn save(path: &Path, img: &PlanarImage) -> Result<()> {
    with_path(imgio::save_image(path, img), path)
}

/// Defaults, then the config file (--config or $NIGHTHAZE_CONFIG), then flags.
fn resolve_config(cli: &Cli, overrides: &PipelineOverrides) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    let file = cli
        .config
        .clone()
        .or_else(|| std::env::var_os("NIGHTHAZE_CONFIG").map(PathBuf::from));
    if let Some(path) = file {
        let text = with_path(std::fs::read_to_string(&path).map_err(Error::Io), &path)?;
        cfg.apply_text(&text)?;
    }
    if let Some(v) = overrides.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = overrides.gamma0 {
        cfg.gamma0 = v;
    }
    if let Some(v) = overrides.patch_radius {
        cfg.patch_radius = v;
    }
    if let Some(v) = overrides.gf_radius {
        cfg.gf_radius = v;
    }
    if let Some(v) = overrides.gf_epsilon {
        cfg.gf_epsilon = v;
    }
    if let Some(v) = overrides.omega {
        cfg.omega = v;
    }
    if let Some(v) = overrides.t_floor {
        cfg.t_floor = v;
    }
    if let Some(v) = overrides.eta_floor {
        cfg.eta_floor = v;
    }
    if let Some(v) = overrides.stretch_lo {
        cfg.stretch_lo = v;
    }
    if let Some(v) = overrides.stretch_hi {
        cfg.stretch_hi = v;
    }
    if overrides.no_stretch {
        cfg.stretch_enabled = false;
    }
    if overrides.force_eta_one {
        cfg.force_unit_eta = true;
    }
    if overrides.two_pass {
        cfg.two_pass_decomposition = true;
    }
    if overrides.global_amplification {
        cfg.global_amplification = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_string())
}

/// Output path for one input: -o names the file directly for a single input,
/// a directory for batches; without -o the result lands next to the input.
fn output_for(input: &Path, output: &Option<PathBuf>, batch: bool) -> PathBuf {
    let default_name = format!("{}_dehazed.png", stem_of(input));
    match output {
        Some(path) if !batch && !path.is_dir() => path.clone(),
        Some(dir) => dir.join(default_name),
        None => input.with_file_name(default_name),
    }
}

fn dump_intermediates(dir: &Path, stem: &str, art: &PipelineArtifacts) -> Result<()> {
    let file = |suffix: &str| dir.join(format!("{stem}_{suffix}.png"));
    save(&file("L"), &art.decomposition.illumination)?;
    save(&file("rhat"), &art.decomposition.surrogate_reflectance)?;
    save(&file("ihat"), &art.i_hat)?;
    save(&file("eta"), &art.eta.eta)?;
    save(&file("itilde"), &art.i_tilde)?;
    save(&file("dark"), &art.dark)?;
    save(&file("t"), &art.transmission.t)?;
    save(&file("A"), &art.env_light.a)?;
    Ok(())
}

fn run_one(cli: &Cli, cfg: &PipelineConfig, input: &Path, batch: bool) -> Result<PathBuf> {
    let img = load(input)?;
    let art = pipeline::run(&img, cfg)?;
    let out_path = output_for(input, &cli.output, batch);
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save(&out_path, &art.output)?;
    if cli.dump_intermediates {
        let dir = out_path.parent().unwrap_or(Path::new("."));
        dump_intermediates(dir, &stem_of(&out_path), &art)?;
    }
    let mut m = Manifest::new("dehaze");
    m.kv("input", input.display())
        .kv("output", out_path.display())
        .kv("dump_intermediates", cli.dump_intermediates)
        .config(cfg)
        .times(&art.times);
    m.write(&manifest_path(&out_path))?;
    Ok(out_path)
}

pub fn dehaze(cli: &Cli, inputs: &[PathBuf], overrides: &PipelineOverrides) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::InvalidParam("no input images given".into()));
    }
    let cfg = resolve_config(cli, overrides)?;
    let batch = inputs.len() > 1;
    if batch {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
        let results: Vec<Result<PathBuf>> = pool.install(|| {
            inputs
                .par_iter()
                .map(|input| run_one(cli, &cfg, input, true))
                .collect()
        });
        for (input, result) in inputs.iter().zip(results) {
            let out = result?;
            println!("{} -> {}", input.display(), out.display());
        }
    } else {
        let out = run_one(cli, &cfg, &inputs[0], false)?;
        println!("{} -> {}", inputs[0].display(), out.display());
    }
    Ok(())
}

pub fn decompose(cli: &Cli, input: &Path, overrides: &PipelineOverrides) -> Result<()> {
    let cfg = resolve_config(cli, overrides)?;
    let img = load(input)?;
    let start = Instant::now();
    let dec = nighthaze::illum::decompose(&img, &cfg)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    let stem = stem_of(input);
    let dir = match &cli.output {
        Some(path) => path.clone(),
        None => input.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    std::fs::create_dir_all(&dir)?;
    let l_path = dir.join(format!("{stem}_L.png"));
    let r_path = dir.join(format!("{stem}_rhat.png"));
    save(&l_path, &dec.illumination)?;
    save(&r_path, &dec.surrogate_reflectance)?;

    let mut m = Manifest::new("decompose");
    m.kv("input", input.display())
        .kv("illumination", l_path.display())
        .kv("surrogate_reflectance", r_path.display())
        .config(&cfg)
        .kv("decompose_ms", format!("{elapsed_ms:.3}"));
    m.write(&manifest_path(&l_path))?;
    println!("{} -> {}, {}", input.display(), l_path.display(), r_path.display());
    Ok(())
}

pub struct SynthOverrides {
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub light_color: Option<String>,
    pub env_patch_radius: Option<usize>,
    pub env_gf_epsilon: Option<f64>,
    pub focal_scale: Option<f64>,
}

fn resolve_synth_config(cli: &Cli, ov: &SynthOverrides) -> Result<SynthConfig> {
    let mut cfg = SynthConfig::default();
    let file = cli
        .config
        .clone()
        .or_else(|| std::env::var_os("NIGHTHAZE_CONFIG").map(PathBuf::from));
    if let Some(path) = file {
        let text = with_path(std::fs::read_to_string(&path).map_err(Error::Io), &path)?;
        // Shared config file: synth keys carry a `synth_` prefix, the rest
        // belong to the pipeline.
        for (key, value) in nighthaze::config::parse_key_values(&text)? {
            if let Some(stripped) = key.strip_prefix("synth_") {
                cfg.set_key(stripped, &value)?;
            } else {
                PipelineConfig::default().set_key(&key, &value)?;
            }
        }
    }
    if let Some(v) = ov.beta {
        cfg.beta = v;
    }
    if let Some(v) = ov.alpha {
        cfg.alpha = v;
    }
    if let Some(spec) = &ov.light_color {
        cfg.set_key("light_color", spec)?;
    }
    if let Some(v) = ov.env_patch_radius {
        cfg.env_patch_radius = v;
    }
    if let Some(v) = ov.env_gf_epsilon {
        cfg.env_gf_epsilon = v;
    }
    if let Some(v) = ov.focal_scale {
        cfg.focal_scale = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sha256_of(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn synth(
    cli: &Cli,
    clear_path: &Path,
    disparity_path: &Path,
    overrides: SynthOverrides,
) -> Result<()> {
    let cfg = resolve_synth_config(cli, &overrides)?;
    let clear = load(clear_path)?;
    let disparity = with_path(imgio::load_disparity(disparity_path), disparity_path)?;
    let scene = generate(&clear, &disparity, &cfg)?;

    let dir = cli
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}_scene", stem_of(clear_path))));
    std::fs::create_dir_all(&dir)?;

    // 16-bit keeps the ground truth close to the generator's precision.
    let files: [(&str, &PlanarImage); 7] = [
        ("reflectance.png", &scene.reflectance),
        ("disparity.png", &scene.disparity),
        ("transmission.png", &scene.transmission),
        ("illumination.png", &scene.illumination),
        ("sigma.png", &scene.sigma_true),
        ("env_light.png", &scene.env_light),
        ("hazy.png", &scene.hazy),
    ];
    for (name, img) in &files {
        let path = dir.join(name);
        with_path(imgio::save_image16(&path, img), &path)?;
    }

    let mut m = Manifest::new("synth");
    m.kv("clear", clear_path.display())
        .kv("disparity", disparity_path.display())
        .kv("output_dir", dir.display())
        .section("config");
    for (key, value) in nighthaze::config::parse_key_values(&cfg.to_key_values())? {
        m.kv(&format!("synth_{key}"), value);
    }
    m.section("checksums");
    for (name, _) in &files {
        m.kv(name, sha256_of(&dir.join(name))?);
    }
    m.write(&dir.join("manifest.txt"))?;
    println!("scene written to {}", dir.display());
    Ok(())
}

pub fn eval(cli: &Cli, pairs: &[String], metrics: &str) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::InvalidParam("no RESULT:REFERENCE pairs given".into()));
    }
    let selected: Vec<&str> = metrics.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    for m in &selected {
        if !["psnr", "ssim", "rmse", "visual"].contains(m) {
            return Err(Error::InvalidParam(format!(
                "unknown metric {m:?} (choose from psnr, ssim, rmse, visual)"
            )));
        }
    }

    let mut report = EvalReport::default();
    for pair in pairs {
        let Some((result_path, reference_path)) = pair.split_once(':') else {
            return Err(Error::InvalidParam(format!(
                "pair {pair:?} is not RESULT:REFERENCE"
            )));
        };
        let result = load(Path::new(result_path))?;
        let reference = load(Path::new(reference_path))?;
        let mut values = Vec::new();
        for metric in &selected {
            match *metric {
                "psnr" => values.push(("psnr".to_string(), psnr(&result, &reference)?)),
                "ssim" => values.push(("ssim".to_string(), ssim(&result, &reference)?)),
                "rmse" => values.push(("rmse".to_string(), rmse(&result, &reference)?)),
                "visual" => {
                    let vm = visual_measure(&result, 50)?;
                    values.push(("visual_mean".to_string(), vm.mean_of_means));
                    values.push(("visual_std".to_string(), vm.mean_of_stds));
                    values.push(("visual_product".to_string(), vm.product));
                }
                _ => unreachable!(),
            }
        }
        report.push(result_path, values);
    }
    report.finalize();

    let prefix = cli
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("eval_report"));
    let csv_path = prefix.with_extension("csv");
    let json_path = prefix.with_extension("json");
    std::fs::write(&csv_path, report.to_csv())?;
    std::fs::write(&json_path, report.to_json())?;
    print!("{}", report.to_csv());
    println!("reports: {}, {}", csv_path.display(), json_path.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct BenchRow {
    size: String,
    width: usize,
    height: usize,
    pixels: usize,
    median_ms: f64,
    reps_ms: Vec<f64>,
}

pub fn bench(cli: &Cli, sizes: &str, reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidParam("reps must be >= 1".into()));
    }
    let mut parsed = Vec::new();
    for token in sizes.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((w, h)) = token.split_once('x') else {
            return Err(Error::InvalidParam(format!("size {token:?} is not WxH")));
        };
        let w: usize = w
            .parse()
            .map_err(|_| Error::InvalidParam(format!("bad width in {token:?}")))?;
        let h: usize = h
            .parse()
            .map_err(|_| Error::InvalidParam(format!("bad height in {token:?}")))?;
        if w == 0 || h == 0 {
            return Err(Error::InvalidParam(format!("size {token:?} is empty")));
        }
        parsed.push((token.to_string(), w, h));
    }
    if parsed.is_empty() {
        return Err(Error::InvalidParam("no sizes given".into()));
    }

    let cfg = PipelineConfig::default();
    let mut rows = Vec::new();
    for (i, (size, w, h)) in parsed.iter().enumerate() {
        let img = noise_image(*w, *h, 3, cli.seed.wrapping_add(i as u64));
        let mut reps_ms = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            let art = pipeline::run(&img, &cfg)?;
            std::hint::black_box(&art.output);
            reps_ms.push(start.elapsed().as_secs_f64() * 1e3);
        }
        let mut sorted = reps_ms.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median_ms = sorted[sorted.len() / 2];
        println!("{size}: median {median_ms:.1} ms over {reps} reps");
        rows.push(BenchRow {
            size: size.clone(),
            width: *w,
            height: *h,
            pixels: w * h,
            median_ms,
            reps_ms,
        });
    }

    let prefix = cli.output.clone().unwrap_or_else(|| PathBuf::from("bench"));
    let mut csv = String::from("size,width,height,pixels,median_ms\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.size, row.width, row.height, row.pixels, row.median_ms
        ));
    }
    std::fs::write(prefix.with_extension("csv"), &csv)?;
    std::fs::write(
        prefix.with_extension("json"),
        serde_json::to_string_pretty(&rows).expect("bench rows serialize"),
    )?;
    Ok(())
}
