//! Link-budget primitives. Configuration is in dBm, computation in milliwatts.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Network;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Relative headroom added to every computed minimum power so that the
/// resulting SNR clears its threshold despite rounding.
const POWER_HEADROOM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    /// Pathloss exponent ν.
    pub nu: f64,
    /// mW per meter^ν.
    pub kappa1: f64,
    /// mW.
    pub kappa2: f64,
    pub rho_tmax_dbm: f64,
    pub rho_rmin_dbm: f64,
    pub noise_dbm: f64,
    /// Minimum detectable SNR ζ, linear.
    pub zeta: f64,
    /// Lyapunov weight β.
    pub beta: f64,
    /// Friis constant Γ̃, dB.
    pub gamma_db: f64,
    pub p_tmin_dbm: f64,
    /// Hard cap on link length, meters.
    pub r_max_m: f64,
    /// Link gain h, applied to every link.
    pub gain: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        let rho_rmin_dbm = -63.0;
        let noise_dbm = -50.0;
        Self {
            nu: 2.0,
            kappa1: 1.0,
            kappa2: 0.0,
            rho_tmax_dbm: 27.0,
            rho_rmin_dbm,
            noise_dbm,
            // The SNR of a signal arriving exactly at receiver sensitivity.
            zeta: dbm_to_mw(rho_rmin_dbm - noise_dbm),
            beta: 2.5,
            gamma_db: 0.0,
            // Zero pathloss must still deliver the sensitivity level.
            p_tmin_dbm: rho_rmin_dbm,
            r_max_m: f64::INFINITY,
            gain: 1.0,
        }
    }
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.nu > 0.0) {
            return bad("nu", "must be positive");
        }
        if !(self.rho_tmax_dbm > self.rho_rmin_dbm) {
            return bad("rho_tmax_dbm", "must exceed rho_rmin_dbm");
        }
        if !(self.p_tmin_dbm <= self.rho_tmax_dbm) {
            return bad("p_tmin_dbm", "must not exceed rho_tmax_dbm");
        }
        if !(self.zeta > 0.0) {
            return bad("zeta", "must be positive");
        }
        if !(self.beta >= 0.0) {
            return bad("beta", "must be non-negative");
        }
        if !(self.gain > 0.0) {
            return bad("gain", "must be positive");
        }
        if !(self.r_max_m > 0.0) {
            return bad("r_max_m", "must be positive");
        }
        if self.kappa1 < 0.0 || self.kappa2 < 0.0 {
            return bad("kappa1", "power-law constants must be non-negative");
        }
        Ok(())
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }

    /// Smallest transmit power (mW) giving SNR ≥ ζ over `d` meters.
    pub fn link_power_mw(&self, d: f64) -> f64 {
        self.zeta * self.noise_mw() * d.powf(self.nu) / self.gain * (1.0 + POWER_HEADROOM)
    }

    /// Distance at which a transmitter at `p_mw` falls to SNR ζ, capped by `r_max_m`.
    pub fn range_m(&self, p_mw: f64) -> f64 {
        (self.gain * p_mw / (self.zeta * self.noise_mw()))
            .powf(1.0 / self.nu)
            .min(self.r_max_m)
    }

    /// Whether a link of length `d` can reach SNR ζ at maximum power.
    pub fn link_feasible(&self, d: f64) -> bool {
        d <= self.r_max_m && self.link_power_mw(d) <= dbm_to_mw(self.rho_tmax_dbm)
    }
}

/// Transmit-power cost of covering range `r`: `κ₁ r^ν + κ₂`, in mW.
pub fn required_transmit_power(r: f64, cfg: &PowerConfig) -> f64 {
    cfg.kappa1 * r.powf(cfg.nu) + cfg.kappa2
}

/// Far-field extrapolation `P_R(d₀) (d₀/d)^ν`.
pub fn received_power(p_r_d0: f64, d0: f64, d: f64, nu: f64) -> f64 {
    if d < d0 {
        log::warn!("received power extrapolated into the near field (d = {d} < d0 = {d0})");
    }
    p_r_d0 * (d0 / d).powf(nu)
}

/// Friis pathloss `10ν log₁₀ d + Γ̃`, dB.
pub fn pathloss_db(d: f64, nu: f64, gamma_db: f64) -> f64 {
    10.0 * nu * d.log10() + gamma_db
}

pub fn friis_received_dbm(p_t_dbm: f64, d: f64, cfg: &PowerConfig) -> f64 {
    p_t_dbm - pathloss_db(d, cfg.nu, cfg.gamma_db)
}

/// Linear SNR `h P_T d^{-ν} / 𝒩` for a transmitter at `p_t_mw`.
pub fn link_snr(p_t_mw: f64, d: f64, cfg: &PowerConfig) -> f64 {
    cfg.gain * p_t_mw * d.powf(-cfg.nu) / cfg.noise_mw()
}

pub fn is_detectable(snr: f64, cfg: &PowerConfig) -> bool {
    snr >= cfg.zeta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkBudget {
    pub node: usize,
    pub gateway: usize,
    pub distance_m: f64,
    /// Far-field reference distance, meters.
    pub d0_m: f64,
    pub gain: f64,
    pub transmit_dbm: f64,
    pub received_dbm: f64,
    pub snr: f64,
}

/// Budget of an end-node to gateway link, with the received power obtained
/// from the Friis form at `d0_m` and extrapolated to the link distance.
pub fn link_budget(
    node: usize,
    gateway: usize,
    distance_m: f64,
    transmit_dbm: f64,
    d0_m: f64,
    cfg: &PowerConfig,
) -> Result<LinkBudget> {
    if !(distance_m > 0.0) || !(d0_m > 0.0) {
        return Err(Error::InvalidParameter {
            name: "distance_m",
            reason: format!("distances must be positive, got d = {distance_m}, d0 = {d0_m}"),
        });
    }
    let p_r_d0 = dbm_to_mw(friis_received_dbm(transmit_dbm, d0_m, cfg));
    Ok(LinkBudget {
        node,
        gateway,
        distance_m,
        d0_m,
        gain: cfg.gain,
        transmit_dbm,
        received_dbm: mw_to_dbm(received_power(p_r_d0, d0_m, distance_m, cfg.nu)),
        snr: link_snr(dbm_to_mw(transmit_dbm), distance_m, cfg),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialPower {
    pub power_dbm: Vec<f64>,
    /// Index into the gateway list.
    pub nearest_gateway: Vec<usize>,
    /// Needed more than `rho_tmax_dbm`; the power was capped.
    pub unreachable: Vec<bool>,
}

/// Smallest power delivering `rho_rmin_dbm` at each node's nearest gateway,
/// clamped to `[p_tmin_dbm, rho_tmax_dbm]`.
pub fn initial_power_assignment(network: &Network, cfg: &PowerConfig) -> Result<InitialPower> {
    initial_power_for(&network.end_nodes, &network.gateways, cfg)
}

pub fn initial_power_for(
    end_nodes: &[Point2<f64>],
    gateways: &[Point2<f64>],
    cfg: &PowerConfig,
) -> Result<InitialPower> {
    cfg.validate()?;
    if gateways.is_empty() {
        return Err(Error::InvalidParameter {
            name: "gateways",
            reason: "initial power needs at least one gateway".into(),
        });
    }
    let mut out = InitialPower {
        power_dbm: Vec::with_capacity(end_nodes.len()),
        nearest_gateway: Vec::with_capacity(end_nodes.len()),
        unreachable: Vec::with_capacity(end_nodes.len()),
    };
    for p in end_nodes {
        let (g, d) = gateways
            .iter()
            .map(|q| (p - q).norm())
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |best, (k, d)| if d < best.1 { (k, d) } else { best },
            );
        let needed = cfg.rho_rmin_dbm + pathloss_db(d, cfg.nu, cfg.gamma_db);
        let needed = mw_to_dbm(dbm_to_mw(needed) * (1.0 + POWER_HEADROOM));
        out.power_dbm.push(needed.clamp(cfg.p_tmin_dbm, cfg.rho_tmax_dbm));
        out.nearest_gateway.push(g);
        out.unreachable.push(needed > cfg.rho_tmax_dbm);
    }
    Ok(out)
}
