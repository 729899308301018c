use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{GeoError, Result};

/// Largest dimension accepted for the parametrised families.
pub const MAX_DIM: usize = 64;
const MAX_DEPTH: usize = 16;

/// Construction recipe for a model space.
///
/// The textual form is the CLI vocabulary: `euclidean(3)` (or `euclidean3`),
/// `pseudoeuclidean(4,1)`, `klein_hyperbolic(2)` (or `klein2`), `sphere2`,
/// `projective_plane`, `punctured_projective_plane`, `punctured_sphere2`,
/// `cylinder`, `flat_torus`, `flat_mobius`, `flat_strip`, `circle`, and
/// `product(a,b)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SpaceSpec {
    Euclidean(usize),
    /// Dimension and number of negative signs; the signature is metadata only.
    PseudoEuclidean(usize, usize),
    KleinHyperbolic(usize),
    Sphere2,
    PuncturedSphere2,
    ProjectivePlane,
    PuncturedProjectivePlane,
    Cylinder,
    FlatTorus,
    FlatMobius,
    FlatStrip,
    Circle,
    Product(Box<SpaceSpec>, Box<SpaceSpec>),
}

impl SpaceSpec {
    pub fn product(a: SpaceSpec, b: SpaceSpec) -> Self {
        SpaceSpec::Product(Box::new(a), Box::new(b))
    }

    /// Apply `--param key=value` overrides.
    pub fn with_params(self, params: &[(String, String)]) -> Result<Self> {
        let mut spec = self;
        for (k, v) in params {
            let num = || -> Result<usize> {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| GeoError::BadParams(format!("{k}={v}: expected a non-negative integer")))
            };
            spec = match (spec, k.as_str()) {
                (SpaceSpec::Euclidean(_), "n" | "dim") => SpaceSpec::Euclidean(num()?),
                (SpaceSpec::KleinHyperbolic(_), "n" | "dim") => SpaceSpec::KleinHyperbolic(num()?),
                (SpaceSpec::PseudoEuclidean(_, q), "n" | "dim") => SpaceSpec::PseudoEuclidean(num()?, q),
                (SpaceSpec::PseudoEuclidean(n, _), "negative" | "signature") => SpaceSpec::PseudoEuclidean(n, num()?),
                (s, _) => return Err(GeoError::BadParams(format!("parameter `{k}` does not apply to {s}"))),
            };
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceSpec::Euclidean(n) | SpaceSpec::KleinHyperbolic(n) => check_dim(*n),
            SpaceSpec::PseudoEuclidean(n, q) => {
                check_dim(*n)?;
                if q > n {
                    return Err(GeoError::BadParams(format!(
                        "signature has {q} negative signs but dimension is {n}"
                    )));
                }
                Ok(())
            }
            SpaceSpec::Product(a, b) => {
                a.validate()?;
                b.validate()?;
                if a.dim() + b.dim() > MAX_DIM {
                    return Err(GeoError::BadParams("product dimension too large".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpaceSpec::Euclidean(n) | SpaceSpec::PseudoEuclidean(n, _) | SpaceSpec::KleinHyperbolic(n) => *n,
            SpaceSpec::Circle => 1,
            SpaceSpec::Product(a, b) => a.dim() + b.dim(),
            _ => 2,
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(GeoError::BadParams(format!(
            "dimension must be in 1..={MAX_DIM}, got {n}"
        )));
    }
    Ok(())
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceSpec::Euclidean(n) => write!(f, "euclidean({n})"),
            SpaceSpec::PseudoEuclidean(n, q) => write!(f, "pseudoeuclidean({n},{q})"),
            SpaceSpec::KleinHyperbolic(n) => write!(f, "klein_hyperbolic({n})"),
            SpaceSpec::Sphere2 => f.write_str("sphere2"),
            SpaceSpec::PuncturedSphere2 => f.write_str("punctured_sphere2"),
            SpaceSpec::ProjectivePlane => f.write_str("projective_plane"),
            SpaceSpec::PuncturedProjectivePlane => f.write_str("punctured_projective_plane"),
            SpaceSpec::Cylinder => f.write_str("cylinder"),
            SpaceSpec::FlatTorus => f.write_str("flat_torus"),
            SpaceSpec::FlatMobius => f.write_str("flat_mobius"),
            SpaceSpec::FlatStrip => f.write_str("flat_strip"),
            SpaceSpec::Circle => f.write_str("circle"),
            SpaceSpec::Product(a, b) => write!(f, "product({a},{b})"),
        }
    }
}

impl FromStr for SpaceSpec {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser {
            src: s.as_bytes(),
            pos: 0,
        };
        let spec = p.spec(0)?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(GeoError::Parse(format!(
                "unexpected trailing input at byte {} in `{s}`",
                p.pos
            )));
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for SpaceSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SpaceSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

enum Arg {
    Int(usize),
    Spec(SpaceSpec),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'-' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(GeoError::Parse(format!("expected a space name at byte {start}")));
        }
        // identifiers are ASCII by construction
        Ok(String::from_utf8_lossy(&self.src[start..self.pos])
            .to_ascii_lowercase()
            .replace('-', "_"))
    }

    fn arg(&mut self, depth: usize) -> Result<Arg> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                text.parse::<usize>()
                    .map(Arg::Int)
                    .map_err(|_| GeoError::Parse(format!("integer `{text}` out of range")))
            }
            _ => self.spec(depth + 1).map(Arg::Spec),
        }
    }

    fn spec(&mut self, depth: usize) -> Result<SpaceSpec> {
        if depth > MAX_DEPTH {
            return Err(GeoError::Parse("space specification nested too deeply".into()));
        }
        let name = self.ident()?;
        let mut args = Vec::new();
        if self.eat(b'(') && !self.eat(b')') {
            loop {
                args.push(self.arg(depth)?);
                if self.eat(b')') {
                    break;
                }
                if !self.eat(b',') {
                    return Err(GeoError::Parse(format!("expected `,` or `)` at byte {}", self.pos)));
                }
            }
        }
        build(&name, args)
    }
}

fn ints(name: &str, args: Vec<Arg>) -> Result<Vec<usize>> {
    args.into_iter()
        .map(|a| match a {
            Arg::Int(n) => Ok(n),
            Arg::Spec(s) => Err(GeoError::BadParams(format!("`{name}` takes integers, got `{s}`"))),
        })
        .collect()
}

fn build(name: &str, args: Vec<Arg>) -> Result<SpaceSpec> {
    let fixed = match name {
        "sphere2" | "sphere" | "s2" => Some(SpaceSpec::Sphere2),
        "punctured_sphere2" | "punctured_sphere" => Some(SpaceSpec::PuncturedSphere2),
        "projective_plane" | "rp2" | "p2" => Some(SpaceSpec::ProjectivePlane),
        "punctured_projective_plane" | "punctured_rp2" => Some(SpaceSpec::PuncturedProjectivePlane),
        "cylinder" => Some(SpaceSpec::Cylinder),
        "flat_torus" | "torus" => Some(SpaceSpec::FlatTorus),
        "flat_mobius" | "mobius" => Some(SpaceSpec::FlatMobius),
        "flat_strip" | "strip" => Some(SpaceSpec::FlatStrip),
        "circle" | "s1" => Some(SpaceSpec::Circle),
        _ => None,
    };
    if let Some(spec) = fixed {
        if !args.is_empty() {
            return Err(GeoError::BadParams(format!("`{name}` takes no parameters")));
        }
        return Ok(spec);
    }
    if name == "product" {
        let mut specs = Vec::new();
        for a in args {
            match a {
                Arg::Spec(s) => specs.push(s),
                Arg::Int(n) => return Err(GeoError::BadParams(format!("product factor `{n}` is not a space"))),
            }
        }
        if specs.len() < 2 {
            return Err(GeoError::BadParams("product needs at least two factors".into()));
        }
        // product(a,b,c) = product(a,product(b,c))
        let mut it = specs.into_iter().rev();
        let mut acc = it.next().expect("two factors");
        for s in it {
            acc = SpaceSpec::product(s, acc);
        }
        return Ok(acc);
    }

    // families with a dimension: `euclidean(3)` or the shorthand `euclidean3`
    let stem = name.trim_end_matches(|c: char| c.is_ascii_digit());
    let mut nums = ints(name, args)?;
    if stem.len() < name.len() {
        let n: usize = name[stem.len()..]
            .parse()
            .map_err(|_| GeoError::Parse(format!("bad dimension suffix in `{name}`")))?;
        nums.insert(0, n);
    }
    let stem = stem.trim_end_matches('_');
    match (stem, nums.as_slice()) {
        ("euclidean" | "r", [n]) => Ok(SpaceSpec::Euclidean(*n)),
        ("klein_hyperbolic" | "klein" | "hyperbolic" | "h", [n]) => Ok(SpaceSpec::KleinHyperbolic(*n)),
        ("pseudoeuclidean", [n]) => Ok(SpaceSpec::PseudoEuclidean(*n, 1)),
        ("pseudoeuclidean", [n, q]) => Ok(SpaceSpec::PseudoEuclidean(*n, *q)),
        ("euclidean" | "r" | "klein_hyperbolic" | "klein" | "hyperbolic" | "h" | "pseudoeuclidean", _) => Err(
            GeoError::BadParams(format!("`{stem}` needs a dimension, got {} numbers", nums.len())),
        ),
        _ => Err(GeoError::UnknownSpace(name.to_string())),
    }
}
