//! The convention sheet every report is stamped with.

use g2core::g2algebra::{PHI0_TERMS, PSI0_TERMS};
use serde::Serialize;
use sha2::{Digest, Sha256};

const RULES: &[&str] = &[
    "indices 1..7, orientation e1234567 positive",
    "forms stored fully antisymmetric; a wedge b = (p+q)!/(p!q!) Alt(a b)",
    "contractions sum over all index tuples, no 1/p! factor",
    "phi.phi = 42, psi.psi = 168, psi = *phi",
    "g = det(s)^(-1/9) s with s_ab = phi_amn phi_bpq phi_rst eps^mnpqrst / 144",
    "T_ab = (1/24) nabla_a phi_cde psi_b^cde, split tau1 g + tau7.phi + tau14 + tau27",
    "chi_bcd = v^e psi_bcde for the Lambda7 deformation",
    "i_phi(h)_abc = Alt(h_a^d phi_bcd), i_psi(h)_abcd = Alt(h_a^e psi_bcde)",
];

#[derive(Clone, Debug, Serialize)]
pub struct Conventions {
    pub sheet: Vec<String>,
    pub sha256: String,
}

fn term<const K: usize>(c: i64, ix: &[usize; K]) -> String {
    let digits: String = ix.iter().map(|i| i.to_string()).collect();
    format!("{}e{digits}", if c < 0 { "-" } else { "+" })
}

pub fn sheet() -> Vec<String> {
    let phi: Vec<String> = PHI0_TERMS.iter().map(|(c, ix)| term(*c, ix)).collect();
    let psi: Vec<String> = PSI0_TERMS.iter().map(|(c, ix)| term(*c, ix)).collect();
    let mut out = vec![format!("phi0 = {}", phi.join(" ")), format!("psi0 = {}", psi.join(" "))];
    out.extend(RULES.iter().map(|r| r.to_string()));
    out
}

pub fn conventions() -> Conventions {
    let sheet = sheet();
    let sha256 = hex::encode(Sha256::digest(sheet.join("\n").as_bytes()));
    Conventions { sheet, sha256 }
}
