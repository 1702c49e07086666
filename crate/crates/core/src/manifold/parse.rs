//! Text grammar for manifolds: `name:key=value,...`.
//!
//! ```text
//! euclidean:dim=3
//! sphere:r=1.0
//! revolution:profile=cosh[,extent=3]
//! revolution:profile=cylinder,r=1.0[,extent=2]
//! revolution:profile=sine,r=1.0[,margin=0.05]
//! revolution:profile=flatband,r=1.0,band=1.0,blend=0.5[,cap=1.0]
//! ```

use std::fmt;
use std::str::FromStr;

use super::{FlatBandParams, ManifoldSpec, ProfileKind, ProfileSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

struct Pairs<'a> {
    items: Vec<(&'a str, &'a str, usize)>,
}

impl<'a> Pairs<'a> {
    fn parse(body: &'a str, offset: usize) -> Result<Self> {
        let mut items = Vec::new();
        if body.is_empty() {
            return Ok(Pairs { items });
        }
        let mut pos = offset;
        for part in body.split(',') {
            let Some((k, v)) = part.split_once('=') else {
                return Err(Error::Parse { pos, msg: format!("expected key=value, found `{part}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(Error::Parse { pos, msg: format!("empty key or value in `{part}`") });
            }
            if items.iter().any(|(seen, _, _)| *seen == k) {
                return Err(Error::Validation { key: k.into(), msg: "given twice".into() });
            }
            items.push((k, v, pos));
            pos += part.len() + 1;
        }
        Ok(Pairs { items })
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        for (k, _, _) in &self.items {
            if !allowed.contains(k) {
                return Err(Error::Validation { key: (*k).into(), msg: format!("unknown key (allowed: {})", allowed.join(", ")) });
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<(&'a str, usize)> {
        self.items.iter().find(|(k, _, _)| *k == key).map(|(_, v, p)| (*v, *p))
    }

    fn real(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.raw(key) {
            Some((v, _)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Validation { key: key.into(), msg: format!("`{v}` is not a finite number") }),
            None => default.ok_or_else(|| Error::Validation { key: key.into(), msg: "required".into() }),
        }
    }
}

pub fn parse_manifold<T: Scalar>(text: &str) -> Result<ManifoldSpec<T>> {
    let text = text.trim();
    let (name, body, offset) = match text.split_once(':') {
        Some((n, b)) => (n, b, n.len() + 1),
        None => (text, "", text.len()),
    };
    let kv = Pairs::parse(body, offset)?;
    match name {
        "euclidean" => {
            kv.only(&["dim"])?;
            let dim = kv.real("dim", None)?;
            if dim.fract() != 0.0 || dim < 0.0 {
                return Err(Error::Validation { key: "dim".into(), msg: "must be a positive integer".into() });
            }
            ManifoldSpec::euclidean(dim as usize)
        }
        "sphere" => {
            kv.only(&["r"])?;
            ManifoldSpec::sphere(T::lit(kv.real("r", None)?))
        }
        "revolution" => {
            let Some((profile, pos)) = kv.raw("profile") else {
                return Err(Error::Validation { key: "profile".into(), msg: "required".into() });
            };
            let prof = match profile {
                "cosh" => {
                    kv.only(&["profile", "extent"])?;
                    ProfileSpec::cosh(T::lit(kv.real("extent", Some(3.0))?))?
                }
                "cylinder" => {
                    kv.only(&["profile", "r", "extent"])?;
                    ProfileSpec::cylinder(T::lit(kv.real("r", None)?), T::lit(kv.real("extent", Some(2.0))?))?
                }
                "sine" => {
                    kv.only(&["profile", "r", "margin"])?;
                    ProfileSpec::sine(T::lit(kv.real("r", None)?), T::lit(kv.real("margin", Some(0.05))?))?
                }
                "flatband" => {
                    kv.only(&["profile", "r", "band", "blend", "cap"])?;
                    let r = kv.real("r", None)?;
                    ProfileSpec::flat_band(FlatBandParams {
                        radius: T::lit(r),
                        band: T::lit(kv.real("band", None)?),
                        blend: T::lit(kv.real("blend", None)?),
                        cap: T::lit(kv.real("cap", Some(r))?),
                    })?
                }
                other => return Err(Error::Parse { pos, msg: format!("unknown profile `{other}`") }),
            };
            ManifoldSpec::revolution(prof)
        }
        other => Err(Error::Parse { pos: 0, msg: format!("unknown manifold `{other}`") }),
    }
}

impl FromStr for ManifoldSpec<f64> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_manifold(s)
    }
}

impl<T: Scalar> fmt::Display for ManifoldSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldSpec::Euclidean { dim } => write!(f, "euclidean:dim={dim}"),
            ManifoldSpec::Sphere { radius } => write!(f, "sphere:r={radius:?}"),
            ManifoldSpec::Revolution { profile } => match profile.kind {
                ProfileKind::Cosh => write!(f, "revolution:profile=cosh,extent={:?}", profile.t_max),
                ProfileKind::Cylinder { r } => {
                    write!(f, "revolution:profile=cylinder,r={r:?},extent={:?}", profile.t_max)
                }
                ProfileKind::Sine { r } => write!(f, "revolution:profile=sine,r={r:?},margin={:?}", profile.t_min),
                ProfileKind::FlatBand(p) => write!(
                    f,
                    "revolution:profile=flatband,r={:?},band={:?},blend={:?},cap={:?}",
                    p.radius, p.band, p.blend, p.cap
                ),
            },
        }
    }
}
