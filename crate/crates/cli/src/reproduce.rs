//! Datasets for the standard figure set.

use rayon::prelude::*;

use fblmac::approx::{linear_opt_k, linear_pc, quad_opt_k, quad_pc, LinearApprox, QuadApprox};
use fblmac::throughput::{cc_throughput, nc_throughput, optimize_k, protocol_throughput, tdma_throughput};
use fblmac::{make_channel, LinkSet, PcModel, Protocol, RelayArm};

use crate::error::{CliError, CliResult};
use crate::table::{real, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4a,
    Fig4b,
    Fig6a,
    Fig6b,
}

impl Figure {
    pub fn parse(s: &str) -> CliResult<Self> {
        Ok(match s {
            "fig2" => Self::Fig2,
            "fig3" => Self::Fig3,
            "fig4a" => Self::Fig4a,
            "fig4b" => Self::Fig4b,
            "fig6a" => Self::Fig6a,
            "fig6b" => Self::Fig6b,
            _ => {
                return Err(CliError::Input(format!(
                    "unknown figure `{s}`; expected fig2, fig3, fig4a, fig4b, fig6a or fig6b"
                )))
            }
        })
    }
}

const SNR: f64 = 1.0;
const N_GRID: std::ops::RangeInclusive<u64> = 1..=60;
const N_STEP: u64 = 50;
const COOP_N: u64 = 1000;
const MODEL: PcModel = PcModel::SecondOrder;

fn triple(fig: Figure) -> (f64, f64, f64) {
    match fig {
        Figure::Fig4a | Figure::Fig6a => (0.2, 0.35, 1.0),
        _ => (0.2, 0.5, 1.0),
    }
}

pub fn render(fig: Figure, arm: RelayArm) -> CliResult<String> {
    match fig {
        Figure::Fig2 | Figure::Fig3 => single_link(fig),
        _ => cooperative(fig, arm),
    }
}

fn single_link(fig: Figure) -> CliResult<String> {
    let ch = make_channel(SNR)?;
    let lin = LinearApprox::default();
    let quad = QuadApprox::default();
    let header: &[&str] = if fig == Figure::Fig2 {
        &["n", "k_exhaustive", "k_linear", "k_quadratic"]
    } else {
        &["n", "u_exhaustive", "u_linear", "u_quadratic", "u_linear_exact", "u_quadratic_exact"]
    };
    let mut table = Table::new(header);
    table.comment(format!("snr={} model={}", real(SNR), MODEL.name()));
    table.comment(format!(
        "n=50..3000 step {N_STEP}; linear delta0={} delta1={}; quadratic theta1={}",
        real(0.5),
        real(1.545),
        real(2.35)
    ));
    if fig == Figure::Fig3 {
        table.comment("u_linear and u_quadratic use the surrogate success probability at its own optimum k");
        table.comment("the _exact columns evaluate the exact success probability at the surrogate optimum k");
    }
    let rows: Vec<Vec<String>> = N_GRID
        .into_par_iter()
        .map(|i| {
            let n = i * N_STEP;
            let (k_ex, u_ex) = optimize_k(n, &ch, MODEL);
            let k_lin = linear_opt_k(n, &ch, &lin);
            let k_quad = quad_opt_k(n, &ch, &quad);
            if fig == Figure::Fig2 {
                return vec![n.to_string(), k_ex.to_string(), k_lin.to_string(), k_quad.to_string()];
            }
            let rate = |k: u64| k as f64 / n as f64;
            vec![
                n.to_string(),
                real(u_ex),
                real(rate(k_lin) * linear_pc(k_lin as f64, n, &ch, &lin)),
                real(rate(k_quad) * quad_pc(k_quad as f64, n, &ch, &quad)),
                real(tdma_throughput(k_lin, n, &ch, MODEL)),
                real(tdma_throughput(k_quad, n, &ch, MODEL)),
            ]
        })
        .collect();
    for r in rows {
        table.push(r);
    }
    Ok(table.render())
}

fn cooperative(fig: Figure, arm: RelayArm) -> CliResult<String> {
    let (sd, sr, rd) = triple(fig);
    let links = LinkSet::from_snr(sd, sr, rd)?;
    let with_baf = matches!(fig, Figure::Fig6a | Figure::Fig6b);
    let mut header = vec!["k", "u_nc", "u_cc"];
    if with_baf {
        header.extend(["u_baf_l1", "u_baf_l2", "u_baf_l3", "u_baf_l4"]);
    }
    let mut table = Table::new(&header);
    table.comment(format!(
        "n={COOP_N} snr_sd={} snr_sr={} snr_rd={} model={}",
        real(sd),
        real(sr),
        real(rd),
        MODEL.name()
    ));
    if with_baf {
        table.comment(format!("protocol={} relay_arm={}", Protocol::BafRelay.name(), arm.name()));
    }
    let rows: Vec<Vec<String>> = (1..=COOP_N)
        .into_par_iter()
        .map(|k| {
            let mut row = vec![
                k.to_string(),
                real(nc_throughput(k, COOP_N, &links, MODEL)),
                real(cc_throughput(k, COOP_N, &links, MODEL).value),
            ];
            if with_baf {
                for batch in 1..=4 {
                    let t = protocol_throughput(Protocol::BafRelay, k, batch, COOP_N, &links, MODEL, arm);
                    row.push(real(t.value));
                }
            }
            row
        })
        .collect();
    for r in rows {
        table.push(r);
    }
    Ok(table.render())
}
