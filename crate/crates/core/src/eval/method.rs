use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{CCHVAE_METHOD, FACE_E_METHOD, FACE_K_METHOD, GS_METHOD, REVISE_METHOD, SCFE_METHOD};
use crate::recourse::DEAR_METHOD;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Dear,
    Scfe,
    Gs,
    Revise,
    Cchvae,
    FaceK,
    FaceE,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Dear,
        Method::Scfe,
        Method::Gs,
        Method::Revise,
        Method::Cchvae,
        Method::FaceK,
        Method::FaceE,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dear => DEAR_METHOD,
            Method::Scfe => SCFE_METHOD,
            Method::Gs => GS_METHOD,
            Method::Revise => REVISE_METHOD,
            Method::Cchvae => CCHVAE_METHOD,
            Method::FaceK => FACE_K_METHOD,
            Method::FaceE => FACE_E_METHOD,
        }
    }

    pub fn names() -> String {
        Method::ALL.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")
    }

    /// Parses a comma-separated list, keeping order and dropping repeats.
    pub fn parse_list(text: &str) -> Result<Vec<Method>, Error> {
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::Config(format!("no methods given; valid names: {}", Method::names())));
        }
        Ok(out)
    }

    /// Whether the method needs the plain autoencoder.
    pub fn uses_plain_autoencoder(self) -> bool {
        matches!(self, Method::Revise | Method::Cchvae)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'; valid names: {}", Method::names())))
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}
