//! JSON run configuration with sections `system`, `campaign`, `ukf`, `gp`
//! and `integrator`.

use std::path::Path;

use mdof_twin::gpr::GpConfig;
use mdof_twin::model::{build_duffing_2dof, build_dvp_7dof, LinkSigns, MdofSystem, SevenDofParams, SystemDocument, TwoDofParams};
use mdof_twin::sde::Scheme;
use mdof_twin::twin::CampaignConfig;
use mdof_twin::ukf::FilterConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "duffing-2dof")]
    Duffing2dof,
    #[serde(rename = "dvp-7dof")]
    Dvp7dof,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Preset {
        preset: Preset,
        #[serde(default)]
        link_signs: LinkSigns,
    },
    Document(SystemDocument),
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec::Preset {
            preset: Preset::Duffing2dof,
            link_signs: LinkSigns::default(),
        }
    }
}

impl SystemSpec {
    pub fn build(&self) -> mdof_twin::Result<MdofSystem> {
        match self {
            SystemSpec::Preset {
                preset: Preset::Duffing2dof,
                ..
            } => build_duffing_2dof(&TwoDofParams::default()),
            SystemSpec::Preset {
                preset: Preset::Dvp7dof,
                link_signs,
            } => build_dvp_7dof(&SevenDofParams {
                link_signs: *link_signs,
                ..SevenDofParams::default()
            }),
            SystemSpec::Document(doc) => MdofSystem::new(doc.clone()),
        }
    }
}

/// Fast-time integration settings; unset fields fall back to the campaign.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: Option<f64>,
    pub scheme: Option<Scheme>,
    /// Seconds.
    pub duration: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub campaign: CampaignConfig,
    pub ukf: Option<FilterConfig>,
    pub gp: Option<GpConfig>,
    pub integrator: IntegratorSection,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// One-based.
    pub observe: Option<Vec<usize>>,
    pub cutoff_days: Option<f64>,
}

/// Fully merged settings used by every subcommand.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    #[serde(skip)]
    pub system: MdofSystem,
    pub system_document: SystemDocument,
    pub campaign: CampaignConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::usage(format!("invalid config {}: {e}", p.display())))
            }
        }
    }

    pub fn resolve(self, ov: &Overrides) -> Result<Resolved, CliError> {
        let system = self.system.build().map_err(CliError::from)?;
        let mut campaign = self.campaign;
        if let Some(f) = self.ukf {
            campaign.filter = f;
        }
        if let Some(g) = self.gp {
            campaign.gp = g;
        }
        if let Some(dt) = self.integrator.dt {
            campaign.dt = dt;
        }
        if let Some(s) = self.integrator.scheme {
            campaign.scheme = s;
        }
        if let Some(d) = self.integrator.duration {
            campaign.window_duration = d;
        }
        if let Some(s) = self.integrator.seed {
            campaign.master_seed = s;
        }
        if let Some(s) = ov.seed {
            campaign.master_seed = s;
        }
        if let Some(obs) = &ov.observe {
            if obs.iter().any(|&d| d == 0) {
                return Err(CliError::usage("--observe takes one-based DOF numbers"));
            }
            campaign.observed_dofs = obs.iter().map(|d| d - 1).collect();
        }
        if let Some(c) = ov.cutoff_days {
            campaign.cutoff_days = Some(c);
        }
        campaign.validate(&system).map_err(CliError::from)?;
        Ok(Resolved {
            system_document: system.document().clone(),
            seed: campaign.master_seed,
            system,
            campaign,
        })
    }
}
