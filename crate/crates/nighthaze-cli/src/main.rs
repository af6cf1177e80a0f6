mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nighthaze::Error;

/// Exit codes: 1 generic, 2 usage (clap), 3 I/O or decode, 4 configuration,
/// 5 dimension mismatch.
fn code_for(err: &Error) -> u8 {
    if err.is_io_error() {
        3
    } else if err.is_config_error() {
        4
    } else if err.is_dimension_error() {
        5
    } else {
        1
    }
}

#[derive(Parser)]
#[command(name = "nighthaze", version, about = "Nighttime image dehazing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file with `key = value` lines; falls back to $NIGHTHAZE_CONFIG.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output file, directory or report prefix, depending on the subcommand.
    #[arg(short, long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Also write every intermediate map.
    #[arg(long, global = true)]
    dump_intermediates: bool,

    /// Worker threads for batch processing (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Seed for generated benchmark images.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    seed: u64,
}

/// Pipeline tunables exposed as flags; flags override the config file.
#[derive(Args, Clone, Default)]
struct PipelineOverrides {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    patch_radius: Option<usize>,
    #[arg(long)]
    gf_radius: Option<usize>,
    #[arg(long)]
    gf_epsilon: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    t_floor: Option<f64>,
    #[arg(long)]
    eta_floor: Option<f64>,
    #[arg(long)]
    stretch_lo: Option<f64>,
    #[arg(long)]
    stretch_hi: Option<f64>,
    /// Disable the robust stretch.
    #[arg(long)]
    no_stretch: bool,
    /// Assume white incident light (skip color estimation).
    #[arg(long)]
    force_eta_one: bool,
    /// Filter the log-reflectance in a second pass.
    #[arg(long)]
    two_pass: bool,
    /// Amplify the color estimate by one global factor.
    #[arg(long)]
    global_amplification: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Restore one or more nighttime hazy images.
    Dehaze {
        /// Input image(s); PNG or binary PPM.
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        overrides: PipelineOverrides,
    },
    /// Run stage 1 only and write the illumination and surrogate reflectance.
    Decompose {
        input: PathBuf,
        #[command(flatten)]
        overrides: PipelineOverrides,
    },
    /// Generate a ground-truthed synthetic nighttime hazy scene.
    Synth {
        /// Clear image used as the reflectance.
        clear: PathBuf,
        /// Disparity map (grayscale; zeros are occlusion holes).
        disparity: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Light-source color as R,G,B.
        #[arg(long, value_name = "R,G,B")]
        light_color: Option<String>,
        #[arg(long)]
        env_patch_radius: Option<usize>,
        #[arg(long)]
        env_gf_epsilon: Option<f64>,
        #[arg(long)]
        focal_scale: Option<f64>,
    },
    /// Evaluate result:reference pairs and write CSV + JSON reports.
    Eval {
        /// Pairs as RESULT:REFERENCE paths.
        pairs: Vec<String>,
        /// Comma list from psnr, ssim, rmse, visual.
        #[arg(long, default_value = "psnr,ssim,rmse")]
        metrics: String,
    },
    /// Time the full pipeline on noise images across sizes.
    Bench {
        /// Comma list of WxH sizes.
        #[arg(
            long,
            default_value = "128x128,128x256,256x256,256x512,512x512,512x1024,1024x1024,1024x2048"
        )]
        sizes: String,
        /// Repetitions per size (median is reported).
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Dehaze { inputs, overrides } => commands::dehaze(&cli, inputs, overrides),
        Command::Decompose { input, overrides } => commands::decompose(&cli, input, overrides),
        Command::Synth {
            clear,
            disparity,
            beta,
            alpha,
            light_color,
            env_patch_radius,
            env_gf_epsilon,
            focal_scale,
        } => commands::synth(
            &cli,
            clear,
            disparity,
            commands::SynthOverrides {
                beta: *beta,
                alpha: *alpha,
                light_color: light_color.clone(),
                env_patch_radius: *env_patch_radius,
                env_gf_epsilon: *env_gf_epsilon,
                focal_scale: *focal_scale,
            },
        ),
        Command::Eval { pairs, metrics } => commands::eval(&cli, pairs, metrics),
        Command::Bench { sizes, reps } => commands::bench(&cli, sizes, *reps),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(code_for(&err))
        }
    }
}
