use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use gridsim::daily::{
    load_profile_csv, load_scenario, run_day, DailyProfiles, ProfileUnit, ScenarioConfig,
};
use gridsim::error::{Error, Result};
use gridsim::format::{csv, sig};
use gridsim::grid::load_network;
use gridsim::inverter::{
    compute_reference, phasor_solve_inverse, track_references, ControllerGains, InverterParams,
    PowerReference,
};
use gridsim::powerflow::{
    slack_power, solve_network, BusInjection, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use gridsim::pv::{cell_temperature, iv_curve, load_pv_params, mpp};
use gridsim::sequence::reduce_configs;
use gridsim::{data_dir, plot};

#[derive(Parser)]
#[command(name = "gridsim", about = "Single-phase distribution feeder simulation with solar generation", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print positive-sequence line parameters per configuration as CSV
    Reduce,
    /// Sample an I-V curve and emit CSV plus an SVG plot
    PvCurve(PvCurveArgs),
    /// Locate the maximum power point for given weather
    Mpp(MppArgs),
    /// Compute inverter current references; optionally simulate tracking
    Inverter(InverterArgs),
    /// Solve one power-flow case from an injections CSV
    Powerflow(PowerflowArgs),
    /// Run the 24-hour scenario and write result files
    Simulate(SimulateArgs),
    /// Plot an hour,value CSV as an SVG chart
    Plot(PlotArgs),
}

#[derive(Args)]
struct PvCurveArgs {
    /// PV parameter file (default: bundled KC200GT)
    #[arg(long)]
    params: Option<PathBuf>,
    /// Irradiance [W/m2]
    #[arg(long, default_value_t = 1000.0)]
    g: f64,
    /// Air temperature [degC]
    #[arg(long, default_value_t = 25.0)]
    t_air: f64,
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// CSV output path (default: stdout)
    #[arg(long)]
    csv_out: Option<PathBuf>,
    /// SVG output path
    #[arg(long)]
    svg_out: Option<PathBuf>,
}

#[derive(Args)]
struct MppArgs {
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    g: f64,
    #[arg(long)]
    t_air: f64,
}

#[derive(Args)]
struct InverterArgs {
    #[arg(long)]
    p_star: f64,
    #[arg(long, default_value_t = 0.0)]
    q_star: f64,
    /// MV grid voltage magnitude [V rms]
    #[arg(long, default_value_t = 2771.2812921102035)]
    v_mv: f64,
    /// Simulate P/PI tracking in the time domain
    #[arg(long)]
    time_domain: bool,
    /// Grid periods to simulate in time-domain mode
    #[arg(long, default_value_t = 25)]
    periods: usize,
    /// Output directory for time-domain CSV and SVG
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PowerflowArgs {
    #[arg(long)]
    network: PathBuf,
    /// CSV of bus,p_kw,q_kvar loads (positive = consumption)
    #[arg(long)]
    injections: Option<PathBuf>,
    /// Output CSV of bus,vmag_pu,vang_deg (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    pv_params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Input CSV with hour,value rows
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "hour")]
    x_label: String,
    #[arg(long, default_value = "value")]
    y_label: String,
    #[arg(long, default_value = "")]
    title: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Reduce => cmd_reduce(),
        Command::PvCurve(args) => cmd_pv_curve(args),
        Command::Mpp(args) => cmd_mpp(args),
        Command::Inverter(args) => cmd_inverter(args),
        Command::Powerflow(args) => cmd_powerflow(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Plot(args) => cmd_plot(args),
    }
}

fn pv_params_path(explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| data_dir().join("kc200gt.toml"))
}

fn cmd_reduce() -> Result<()> {
    let configs = gridsim::grid::standard_line_configs();
    let seq = reduce_configs(&configs);
    println!("config,r1_ohm_per_mile,x1_ohm_per_mile,b1_us_per_mile");
    for params in seq.values() {
        println!(
            "{},{},{},{}",
            params.config_id,
            csv(params.z_positive.re),
            csv(params.z_positive.im),
            csv(params.b_positive)
        );
    }
    Ok(())
}

fn cmd_pv_curve(args: PvCurveArgs) -> Result<()> {
    let params = load_pv_params(&pv_params_path(&args.params))?;
    let t_cell = cell_temperature(args.t_air, args.g, params.noct_c);
    let curve = iv_curve(&params, args.g, t_cell, args.points)?;
    let mut out = String::from("v,i,p\n");
    for pt in &curve {
        out.push_str(&format!("{},{},{}\n", csv(pt.v), csv(pt.i), csv(pt.p)));
    }
    match &args.csv_out {
        Some(path) => std::fs::write(path, out)?,
        None => print!("{out}"),
    }
    if let Some(path) = &args.svg_out {
        let spec = plot::PlotSpec {
            title: format!("I-V curve, G = {} W/m2, T = {} K", sig(args.g, 6), sig(t_cell, 6)),
            x_label: "V [V]".into(),
            y_label: "I [A]".into(),
            series: vec![plot::Series {
                label: "I(V)".into(),
                x: curve.iter().map(|p| p.v).collect(),
                y: curve.iter().map(|p| p.i).collect(),
            }],
        };
        plot::write_svg(&spec, path)?;
    }
    Ok(())
}

fn cmd_mpp(args: MppArgs) -> Result<()> {
    let params = load_pv_params(&pv_params_path(&args.params))?;
    let t_cell = cell_temperature(args.t_air, args.g, params.noct_c);
    let point = mpp(&params, args.g, t_cell)?;
    println!("T_cell = {} K", sig(t_cell, 6));
    println!("V = {} V", sig(point.v, 6));
    println!("I = {} A", sig(point.i, 6));
    println!("P = {} W", sig(point.p, 6));
    Ok(())
}

fn cmd_inverter(args: InverterArgs) -> Result<()> {
    let inv = InverterParams::default();
    let reference = PowerReference { p_star: args.p_star, q_star: args.q_star };
    let current = compute_reference(&reference, args.v_mv, &inv)?;
    let v_g = Complex64::new(inv.v_lv_rms, 0.0);
    let (ipv_mag, ipv_phase) = phasor_solve_inverse(&current, &inv, v_g);
    println!("quantity,value,unit");
    println!("phi_L_star,{},rad", sig(current.phi_l_star, 6));
    println!("I_L_MV_star,{},A rms", sig(current.i_l_mv_star, 6));
    println!("I_L_star,{},A rms", sig(current.i_l_star, 6));
    println!("i_pv_mag_star,{},A rms", sig(ipv_mag, 6));
    println!("phi_star,{},rad", sig(ipv_phase, 6));
    if args.time_domain {
        let period = 2.0 * std::f64::consts::PI / inv.omega;
        let result = track_references(
            &current,
            &inv,
            &ControllerGains::default(),
            args.periods as f64 * period,
        )?;
        std::fs::create_dir_all(&args.out)?;
        let mut text = String::from("period,i_l_rms,i_l_phase_rad\n");
        for s in &result.periods {
            text.push_str(&format!("{},{},{}\n", s.period, csv(s.i_l_rms), csv(s.i_l_phase)));
        }
        std::fs::write(args.out.join("tracking.csv"), text)?;
        let spec = plot::PlotSpec {
            title: "Tracking convergence".into(),
            x_label: "grid period".into(),
            y_label: "I_L [A rms] / phase [rad]".into(),
            series: vec![
                plot::Series {
                    label: "I_L rms".into(),
                    x: result.periods.iter().map(|s| s.period as f64).collect(),
                    y: result.periods.iter().map(|s| s.i_l_rms).collect(),
                },
                plot::Series {
                    label: "phase".into(),
                    x: result.periods.iter().map(|s| s.period as f64).collect(),
                    y: result.periods.iter().map(|s| s.i_l_phase).collect(),
                },
            ],
        };
        plot::write_svg(&spec, &args.out.join("tracking.svg"))?;
        println!(
            "tracking: {} after {} periods",
            if result.converged { "settled" } else { "did not settle" },
            result.periods.len()
        );
    }
    Ok(())
}

fn parse_injections(path: &Path, s_base: f64) -> Result<Vec<BusInjection>> {
    let text = std::fs::read_to_string(path)?;
    let mut injections = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("bus")) {
            continue;
        }
        let err = |msg: &str| Error::Parse(format!("{}:{}: {msg}", path.display(), lineno + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err("expected bus,p_kw,q_kvar"));
        }
        let bus: u32 = fields[0].parse().map_err(|_| err("bad bus id"))?;
        let p_kw: f64 = fields[1].parse().map_err(|_| err("bad p_kw"))?;
        let q_kvar: f64 = fields[2].parse().map_err(|_| err("bad q_kvar"))?;
        // loads are positive consumption; injections are negative
        injections.push(BusInjection {
            bus,
            p: -p_kw * 1e3 / s_base,
            q: -q_kvar * 1e3 / s_base,
        });
    }
    Ok(injections)
}

fn cmd_powerflow(args: PowerflowArgs) -> Result<()> {
    let net = load_network(&args.network)?;
    let seq = reduce_configs(&net.configs);
    let injections = match &args.injections {
        Some(path) => parse_injections(path, net.base.s_base)?,
        None => Vec::new(),
    };
    let sol = solve_network(
        &net,
        &seq,
        &injections,
        Complex64::new(1.0, 0.0),
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )?;
    let mut out = String::from("bus,vmag_pu,vang_deg\n");
    for (bus, v) in &sol.voltages {
        out.push_str(&format!(
            "{},{},{}\n",
            bus,
            csv(v.norm()),
            csv(v.arg().to_degrees())
        ));
    }
    match &args.out {
        Some(path) => std::fs::write(path, out)?,
        None => print!("{out}"),
    }
    println!(
        "iterations: {}  mismatch: {} p.u.  losses: {} + j{} p.u.",
        sol.iterations,
        sig(sol.max_mismatch, 6),
        sig(sol.total_loss.re, 6),
        sig(sol.total_loss.im, 6)
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let net = load_network(&args.network)?;
    let seq = reduce_configs(&net.configs);
    let params = load_pv_params(&pv_params_path(&args.pv_params))?;
    let cfg = match &args.scenario {
        Some(path) => load_scenario(path)?,
        None => ScenarioConfig::default(),
    };
    let profiles = DailyProfiles {
        load_kw: load_profile_csv(&data_dir().join("load_profile.csv"), ProfileUnit::Kilowatts)?,
        irradiance: load_profile_csv(
            &data_dir().join("irradiance.csv"),
            ProfileUnit::WattsPerSquareMeter,
        )?,
        temperature_c: load_profile_csv(
            &data_dir().join("temperature.csv"),
            ProfileUnit::Celsius,
        )?,
    };
    let result = run_day(&net, &seq, &params, &profiles, &cfg)?;
    std::fs::create_dir_all(&args.out)?;

    let mut voltages = String::from("hour,bus,vmag_pu,vang_deg\n");
    let mut flows = String::from("hour,from,to,p_from_pu,q_from_pu,p_to_pu,q_to_pu\n");
    let mut pv = String::from("hour,bus,p_star_w,q_star_var\n");
    for h in &result.hours {
        for (bus, v) in &h.solution.voltages {
            voltages.push_str(&format!(
                "{},{},{},{}\n",
                h.hour,
                bus,
                csv(v.norm()),
                csv(v.arg().to_degrees())
            ));
        }
        for f in &h.solution.branch_flows {
            flows.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                h.hour,
                f.from_bus,
                f.to_bus,
                csv(f.s_from.re),
                csv(f.s_from.im),
                csv(f.s_to.re),
                csv(f.s_to.im)
            ));
        }
        for (bus, out) in &h.pv_outputs {
            pv.push_str(&format!(
                "{},{},{},{}\n",
                h.hour,
                bus,
                csv(out.p_star),
                csv(out.q_star)
            ));
        }
    }
    std::fs::write(args.out.join("voltages.csv"), voltages)?;
    std::fs::write(args.out.join("flows.csv"), flows)?;
    std::fs::write(args.out.join("pv.csv"), pv)?;

    let summary = summary_json(&net, &result);
    std::fs::write(args.out.join("summary.json"), summary)?;

    let hours: Vec<f64> = result.hours.iter().map(|h| h.hour as f64).collect();
    let spec = plot::PlotSpec {
        title: "Daily scenario".into(),
        x_label: "hour".into(),
        y_label: "P [kW]".into(),
        series: vec![
            plot::Series {
                label: "slack import".into(),
                x: hours.clone(),
                y: result
                    .hours
                    .iter()
                    .map(|h| slack_power(&h.solution, net.slack_bus()).re * net.base.s_base / 1e3)
                    .collect(),
            },
            plot::Series {
                label: "total load".into(),
                x: hours.clone(),
                y: result.hours.iter().map(|h| h.total_load_kw).collect(),
            },
            plot::Series {
                label: "total PV".into(),
                x: hours,
                y: result.hours.iter().map(|h| h.total_pv_kw).collect(),
            },
        ],
    };
    plot::write_svg(&spec, &args.out.join("hourly.svg"))?;
    println!("wrote voltages.csv, flows.csv, pv.csv, summary.json, hourly.svg to {}", args.out.display());
    Ok(())
}

fn summary_json(net: &gridsim::grid::NetworkModel, result: &gridsim::daily::DailyResult) -> String {
    use serde_json::json;
    let hours: Vec<serde_json::Value> = result
        .hours
        .iter()
        .map(|h| {
            let slack = slack_power(&h.solution, net.slack_bus());
            json!({
                "hour": h.hour,
                "iterations": h.solution.iterations,
                "max_mismatch_pu": h.solution.max_mismatch,
                "total_load_kw": h.total_load_kw,
                "total_pv_kw": h.total_pv_kw,
                "loss_kw": h.loss.re * net.base.s_base / 1e3,
                "slack_p_kw": slack.re * net.base.s_base / 1e3,
                "slack_q_kvar": slack.im * net.base.s_base / 1e3,
            })
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&json!({
        "s_base_va": net.base.s_base,
        "v_base_v": net.base.v_base,
        "hours": hours,
    }))
    .expect("serializable summary");
    text.push('\n');
    text
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.chars().next().is_some_and(|c| c.is_alphabetic())) {
            continue;
        }
        let err = |msg: &str| Error::Parse(format!("{}:{}: {msg}", args.input.display(), lineno + 1));
        let mut parts = line.split(',');
        let xv: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err("bad x value"))?;
        let yv: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err("bad y value"))?;
        x.push(xv);
        y.push(yv);
    }
    let spec = plot::PlotSpec {
        title: args.title.clone(),
        x_label: args.x_label.clone(),
        y_label: args.y_label.clone(),
        series: vec![plot::Series { label: args.y_label.clone(), x, y }],
    };
    plot::write_svg(&spec, &args.out)?;
    Ok(())
}
