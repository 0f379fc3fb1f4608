use std::fmt;
use std::io::Write;
use std::path::Path;

use tgbs::Error;

use crate::config::RunConfig;

/// A failed run, by exit-code category.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Precision(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Precision(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Precision(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io(_) => Failure::Io(msg),
            Error::Precision { .. }
            | Error::NormalizationDrift { .. }
            | Error::NumericalDomain(_)
            | Error::NotUnitary { .. }
            | Error::ImpossibleOutcome { .. } => Failure::Precision(msg),
            _ => Failure::Validation(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// `# {json}` provenance line.
pub fn header(config: &RunConfig) -> String {
    let json = serde_json::to_string(config).expect("run configuration serializes");
    format!("# {json}\n")
}

/// Buffers `body` behind the provenance header, then writes it to `path`
/// or stdout in one piece.
pub fn write_csv<F>(path: Option<&Path>, config: &RunConfig, body: F) -> Result<(), Failure>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), Failure>,
{
    let mut buf = header(config).into_bytes();
    body(&mut buf)?;
    emit(path, &buf)
}

pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(Failure::from(Error::InvalidArgument("x".into())).code(), 1);
        assert_eq!(Failure::from(Error::LimitExceeded { what: "modes", value: 11, limit: 10 }).code(), 1);
        assert_eq!(Failure::from(Error::Precision { mode: 3, value: -1e-9 }).code(), 2);
        assert_eq!(Failure::from(Error::NormalizationDrift { mode: 3, drift: 0.1 }).code(), 2);
        assert_eq!(Failure::from(Error::NumericalDomain("singular".into())).code(), 2);
        assert_eq!(Failure::from(Error::Io("disk".into())).code(), 3);
    }
}
