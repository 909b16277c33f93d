use serde::{Deserialize, Serialize};
use std::fmt;

/// Identifier of a LIMA router or gateway inside the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct LimaNodeId(pub u16);

/// LoRaWAN session address of an end device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct DevAddr(pub u32);

/// LoRaWAN 64-bit device EUI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct DevEui(pub u64);

/// XOR-folds the four big-endian 16-bit words of a hardware EUI.
///
/// Collisions between distinct EUIs are possible and not detected.
pub fn derive_node_id(eui: [u8; 8]) -> LimaNodeId {
    let id = eui
        .chunks_exact(2)
        .map(|w| u16::from_be_bytes([w[0], w[1]]))
        .fold(0u16, |acc, w| acc ^ w);
    LimaNodeId(id)
}

impl fmt::Display for LimaNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:04X}", self.0)
    }
}

impl fmt::Display for DevAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08X}", self.0)
    }
}

impl fmt::Display for DevEui {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016X}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: fold byte pairs as integers without chunking helpers.
    fn fold_oracle(eui: [u8; 8]) -> u16 {
        let mut acc = 0u32;
        for i in 0..4 {
            acc ^= (eui[2 * i] as u32) << 8 | eui[2 * i + 1] as u32;
        }
        acc as u16
    }

    #[test]
    fn zero_eui() {
        assert_eq!(derive_node_id([0; 8]), LimaNodeId(0x0000));
    }

    #[test]
    fn even_fold_cancels() {
        assert_eq!(
            derive_node_id([0xAA, 0xBB, 0xAA, 0xBB, 0xAA, 0xBB, 0xAA, 0xBB]),
            LimaNodeId(0x0000)
        );
    }

    #[test]
    fn counting_eui() {
        // 0x0102 ^ 0x0304 ^ 0x0506 ^ 0x0708
        let eui = [1, 2, 3, 4, 5, 6, 7, 8];
        assert_eq!(fold_oracle(eui), 0x0008);
        assert_eq!(derive_node_id(eui), LimaNodeId(0x0008));
    }

    #[test]
    fn deterministic_against_oracle() {
        let mut x: u64 = 0x9E37_79B9_7F4A_7C15;
        for _ in 0..1000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let eui = x.to_be_bytes();
            assert_eq!(derive_node_id(eui).0, fold_oracle(eui));
            assert_eq!(derive_node_id(eui), derive_node_id(eui));
        }
    }
}
