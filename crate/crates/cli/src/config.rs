//! Market description files. A TOML file names the loadings and, per asset,
//! the trading clock, the efficient-shock scale, the noise regime, and an
//! optional calendar deformation. Sections are plain key-value tables with a
//! `kind` discriminator so that typos surface as parse errors instead of
//! silently ignored keys.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

use tickcoint_core::clock::DeformationSpec;
use tickcoint_core::durations::{AcdSpec, LmsdSpec};
use tickcoint_core::fracgauss::GaussianSpec;
use tickcoint_core::market::{AssetConfig, ClockSpec, MarketConfig};
use tickcoint_core::shocks::{EfficientSpec, NoiseSpec, XiConstruction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    /// Self-consistent pair shorthand: loadings `(theta, 1/theta)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta21: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta12: Option<f64>,
    pub asset1: AssetSection,
    pub asset2: AssetSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetSection {
    /// Efficient-shock standard deviation per trade.
    pub sigma: f64,
    pub clock: ClockSection,
    pub noise: NoiseSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deformation: Option<DeformSection>,
}

/// `kind = "poisson" | "lmsd" | "acd"`; only that kind's keys may be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub driver_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub driver_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

/// `kind = "none" | "weak" | "strong"`. Weak takes `h` and `c`; strong takes
/// `c` and a `construction` of `independent` (with `driver_h`, `driver_c`),
/// `square`, `hermite23`, or `martingale` (with `sigma`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construction: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub driver_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub driver_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// `kind = "seasonal"` (amplitude, period) or `kind = "piecewise"` (knots).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformSection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<[f64; 2]>>,
}

fn require(value: Option<f64>, key: &str, ctx: &str) -> Result<f64> {
    value.with_context(|| format!("{ctx}: missing key `{key}`"))
}

fn reject_unused(pairs: &[(&Option<f64>, &str)], ctx: &str, kind: &str) -> Result<()> {
    for (value, key) in pairs {
        if value.is_some() {
            bail!("{ctx}: key `{key}` does not apply to kind \"{kind}\"");
        }
    }
    Ok(())
}

impl ClockSection {
    fn to_spec(&self, ctx: &str) -> Result<ClockSpec> {
        let ctx = format!("{ctx}.clock");
        match self.kind.as_str() {
            "poisson" => {
                reject_unused(
                    &[
                        (&self.sigma, "sigma"),
                        (&self.driver_h, "driver_h"),
                        (&self.driver_c, "driver_c"),
                        (&self.omega, "omega"),
                        (&self.alpha, "alpha"),
                        (&self.beta, "beta"),
                    ],
                    &ctx,
                    "poisson",
                )?;
                Ok(ClockSpec::Poisson {
                    lambda: require(self.lambda, "lambda", &ctx)?,
                })
            }
            "lmsd" => {
                reject_unused(
                    &[
                        (&self.lambda, "lambda"),
                        (&self.omega, "omega"),
                        (&self.alpha, "alpha"),
                        (&self.beta, "beta"),
                    ],
                    &ctx,
                    "lmsd",
                )?;
                Ok(ClockSpec::Lmsd(LmsdSpec {
                    sigma: require(self.sigma, "sigma", &ctx)?,
                    driver: GaussianSpec::LongMemory {
                        h: require(self.driver_h, "driver_h", &ctx)?,
                        c: require(self.driver_c, "driver_c", &ctx)?,
                    },
                }))
            }
            "acd" => {
                reject_unused(
                    &[
                        (&self.lambda, "lambda"),
                        (&self.sigma, "sigma"),
                        (&self.driver_h, "driver_h"),
                        (&self.driver_c, "driver_c"),
                    ],
                    &ctx,
                    "acd",
                )?;
                Ok(ClockSpec::Acd(AcdSpec::new(
                    require(self.omega, "omega", &ctx)?,
                    require(self.alpha, "alpha", &ctx)?,
                    require(self.beta, "beta", &ctx)?,
                )))
            }
            other => bail!("{ctx}: unknown clock kind \"{other}\" (poisson, lmsd, acd)"),
        }
    }
}

impl NoiseSection {
    fn to_spec(&self, ctx: &str) -> Result<NoiseSpec> {
        let ctx = format!("{ctx}.noise");
        let no_construction = |kind: &str| -> Result<()> {
            if self.construction.is_some() {
                bail!("{ctx}: key `construction` does not apply to kind \"{kind}\"");
            }
            Ok(())
        };
        match self.kind.as_str() {
            "none" => {
                no_construction("none")?;
                reject_unused(
                    &[
                        (&self.h, "h"),
                        (&self.c, "c"),
                        (&self.driver_h, "driver_h"),
                        (&self.driver_c, "driver_c"),
                        (&self.sigma, "sigma"),
                    ],
                    &ctx,
                    "none",
                )?;
                Ok(NoiseSpec::None)
            }
            "weak" => {
                no_construction("weak")?;
                reject_unused(
                    &[
                        (&self.driver_h, "driver_h"),
                        (&self.driver_c, "driver_c"),
                        (&self.sigma, "sigma"),
                    ],
                    &ctx,
                    "weak",
                )?;
                Ok(NoiseSpec::Weak {
                    h: require(self.h, "h", &ctx)?,
                    c: require(self.c, "c", &ctx)?,
                })
            }
            "strong" => {
                if self.h.is_some() {
                    bail!("{ctx}: key `h` does not apply to kind \"strong\"");
                }
                let c = require(self.c, "c", &ctx)?;
                let construction = self
                    .construction
                    .as_deref()
                    .with_context(|| format!("{ctx}: missing key `construction`"))?;
                let construction = match construction {
                    "independent" => XiConstruction::IndependentLongMemory {
                        driver: GaussianSpec::LongMemory {
                            h: require(self.driver_h, "driver_h", &ctx)?,
                            c: require(self.driver_c, "driver_c", &ctx)?,
                        },
                    },
                    "square" | "hermite23" => {
                        reject_unused(
                            &[
                                (&self.driver_h, "driver_h"),
                                (&self.driver_c, "driver_c"),
                                (&self.sigma, "sigma"),
                            ],
                            &ctx,
                            construction,
                        )?;
                        if construction == "square" {
                            XiConstruction::LeverageSquare
                        } else {
                            XiConstruction::LeverageHermite23
                        }
                    }
                    "martingale" => {
                        reject_unused(
                            &[(&self.driver_h, "driver_h"), (&self.driver_c, "driver_c")],
                            &ctx,
                            "martingale",
                        )?;
                        XiConstruction::MartingaleProduct {
                            sigma: require(self.sigma, "sigma", &ctx)?,
                        }
                    }
                    other => bail!(
                        "{ctx}: unknown construction \"{other}\" \
                         (independent, square, hermite23, martingale)"
                    ),
                };
                Ok(NoiseSpec::Strong { construction, c })
            }
            other => bail!("{ctx}: unknown noise kind \"{other}\" (none, weak, strong)"),
        }
    }
}

impl DeformSection {
    fn to_spec(&self, ctx: &str) -> Result<DeformationSpec> {
        let ctx = format!("{ctx}.deformation");
        match self.kind.as_str() {
            "seasonal" => {
                if self.knots.is_some() {
                    bail!("{ctx}: key `knots` does not apply to kind \"seasonal\"");
                }
                Ok(DeformationSpec::Seasonal {
                    amplitude: require(self.amplitude, "amplitude", &ctx)?,
                    period: require(self.period, "period", &ctx)?,
                })
            }
            "piecewise" => {
                reject_unused(
                    &[(&self.amplitude, "amplitude"), (&self.period, "period")],
                    &ctx,
                    "piecewise",
                )?;
                let knots = self
                    .knots
                    .as_ref()
                    .with_context(|| format!("{ctx}: missing key `knots`"))?;
                Ok(DeformationSpec::PiecewiseLinear {
                    knots: knots.iter().map(|k| (k[0], k[1])).collect(),
                })
            }
            other => bail!("{ctx}: unknown deformation kind \"{other}\" (seasonal, piecewise)"),
        }
    }
}

impl AssetSection {
    fn to_config(&self, ctx: &str) -> Result<AssetConfig> {
        Ok(AssetConfig {
            clock: self.clock.to_spec(ctx)?,
            efficient: EfficientSpec { sigma: self.sigma },
            noise: self.noise.to_spec(ctx)?,
            deformation: self
                .deformation
                .as_ref()
                .map(|d| d.to_spec(ctx))
                .transpose()?,
        })
    }
}

impl MarketFile {
    /// Converts the file into a validated market configuration.
    pub fn to_market_config(&self) -> Result<MarketConfig> {
        let a1 = self.asset1.to_config("asset1")?;
        let a2 = self.asset2.to_config("asset2")?;
        let cfg = match (self.theta, self.theta21, self.theta12) {
            (Some(theta), None, None) => MarketConfig::cointegrated(theta, a1, a2),
            (None, Some(t21), Some(t12)) => MarketConfig::with_loadings(t21, t12, a1, a2),
            (None, None, None) => bail!("set `theta` or both `theta21` and `theta12`"),
            (Some(_), _, _) => bail!("`theta` excludes `theta21`/`theta12`"),
            _ => bail!("`theta21` and `theta12` must be set together"),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_market(path: &Path) -> Result<MarketConfig> {
    parse_market_file(path)?.to_market_config()
}

pub fn parse_market_file(path: &Path) -> Result<MarketFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Commented starter configuration written by `tickcoint init`.
pub const EXAMPLE_CONFIG: &str = r#"# Market description.
#
# `theta` requests the self-consistent loading pair (theta, 1/theta);
# spell out `theta21` and `theta12` instead for an arbitrary pair.
theta = 1.5

[asset1]
# Efficient-shock standard deviation per trade.
sigma = 1.0

[asset1.clock]
# One of: poisson (lambda), lmsd (sigma, driver_h, driver_c),
# acd (omega, alpha, beta).
kind = "poisson"
lambda = 1.0

[asset1.noise]
# One of: none, weak (h, c), strong (construction, c, ...).
# Strong constructions: independent (driver_h, driver_c), square,
# hermite23, martingale (sigma); the last three ride an lmsd clock's
# volatility driver.
kind = "weak"
h = 0.25
c = 1.0

[asset2]
sigma = 1.0

[asset2.clock]
kind = "poisson"
lambda = 1.0

[asset2.noise]
kind = "weak"
h = 0.25
c = 1.0

# Optional per-asset calendar deformation:
#
# [asset1.deformation]
# kind = "seasonal"
# amplitude = 0.05
# period = 1.0
#
# or a piecewise-linear operational clock with flat nontrading stretches:
#
# [asset1.deformation]
# kind = "piecewise"
# knots = [[0.0, 0.0], [6.5, 6.5], [24.0, 7.0]]
"#;

#[cfg(test)]
mod tests {
    use super::*;

    /// Canonical serialization: parse-then-write is idempotent.
    fn to_toml(file: &MarketFile) -> Result<String> {
        Ok(toml::to_string_pretty(file)?)
    }

    #[test]
    fn example_parses_and_round_trips() {
        let file: MarketFile = toml::from_str(EXAMPLE_CONFIG).unwrap();
        let cfg = file.to_market_config().unwrap();
        assert!(cfg.is_cointegrated());
        assert_eq!(cfg.theta21, 1.5);

        let canonical = to_toml(&file).unwrap();
        let reparsed: MarketFile = toml::from_str(&canonical).unwrap();
        assert_eq!(file, reparsed);
        assert_eq!(to_toml(&reparsed).unwrap(), canonical);
    }

    #[test]
    fn rejects_unknown_and_misplaced_keys() {
        let unknown = EXAMPLE_CONFIG.replace("theta = 1.5", "theta = 1.5\nthetaa = 2.0");
        let err = toml::from_str::<MarketFile>(&unknown).unwrap_err();
        assert!(err.to_string().contains("thetaa"), "{err}");

        let misplaced = EXAMPLE_CONFIG.replace(
            "kind = \"poisson\"\nlambda = 1.0",
            "kind = \"poisson\"\nlambda = 1.0\nomega = 0.2",
        );
        let file: MarketFile = toml::from_str(&misplaced).unwrap();
        let err = file.to_market_config().unwrap_err();
        assert!(err.to_string().contains("omega"), "{err}");
    }

    #[test]
    fn loading_styles_are_exclusive() {
        let both = EXAMPLE_CONFIG.replace("theta = 1.5", "theta = 1.5\ntheta21 = 2.0");
        let file: MarketFile = toml::from_str(&both).unwrap();
        assert!(file.to_market_config().is_err());

        let spurious = EXAMPLE_CONFIG.replace("theta = 1.5", "theta21 = 2.0\ntheta12 = 0.1");
        let cfg = toml::from_str::<MarketFile>(&spurious)
            .unwrap()
            .to_market_config()
            .unwrap();
        assert!(!cfg.is_cointegrated());
    }

    #[test]
    fn strong_noise_sections_convert() {
        let text = r#"
theta = 1.0

[asset1]
sigma = 1.0
[asset1.clock]
kind = "lmsd"
sigma = 1.0
driver_h = 0.7
driver_c = 0.2
[asset1.noise]
kind = "strong"
construction = "square"
c = 0.5

[asset2]
sigma = 1.0
[asset2.clock]
kind = "acd"
omega = 0.2
alpha = 0.1
beta = 0.7
[asset2.noise]
kind = "strong"
construction = "independent"
driver_h = 0.6
driver_c = 0.3
c = 0.5
"#;
        let cfg = toml::from_str::<MarketFile>(text)
            .unwrap()
            .to_market_config()
            .unwrap();
        assert!(matches!(
            cfg.assets[0].noise,
            NoiseSpec::Strong {
                construction: XiConstruction::LeverageSquare,
                ..
            }
        ));
        assert!(matches!(cfg.assets[1].clock, ClockSpec::Acd(_)));

        // Leverage constructions need the LMSD volatility driver; other
        // clocks are rejected with the offending asset named.
        let incompatible = text.replace("construction = \"square\"", "construction = \"martingale\"\nsigma = 1.0");
        let err = toml::from_str::<MarketFile>(&incompatible)
            .unwrap()
            .to_market_config();
        assert!(err.is_ok(), "martingale rides the lmsd clock fine");

        let acd_martingale = incompatible.replace(
            "kind = \"lmsd\"\nsigma = 1.0\ndriver_h = 0.7\ndriver_c = 0.2",
            "kind = \"poisson\"\nlambda = 1.0",
        );
        let err = toml::from_str::<MarketFile>(&acd_martingale)
            .unwrap()
            .to_market_config()
            .unwrap_err();
        assert!(err.to_string().contains("asset 1"), "{err}");
    }
}
