//! Shard container: a fixed 30-byte little-endian header followed by the
//! payload.
//!
//! ```text
//! offset size field
//!      0    4 magic "NMDS"
//!      4    1 version (1)
//!      5    2 k
//!      7    1 role (0 systematic, 1 parity)
//!      8    2 partition (0-based)
//!     10    4 stripe index
//!     14    4 fragment size
//!     18    8 original file length
//!     26    4 CRC-32 (IEEE) of the payload
//! ```

use crate::codec::{NodeId, Packet, Role};

use super::StoreError;

pub const MAGIC: [u8; 4] = *b"NMDS";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShardHeader {
    pub k: u16,
    pub node: NodeId,
    pub stripe_index: u32,
    pub fragment_size: u32,
    pub original_file_len: u64,
    pub payload_crc32: u32,
}

impl ShardHeader {
    fn validate(&self) -> Result<(), StoreError> {
        if self.k < 2 {
            return Err(StoreError::InvalidHeader(format!("k = {} is below 2", self.k)));
        }
        if self.node.partition >= self.k as usize {
            return Err(StoreError::InvalidHeader(format!("partition {} out of range for k = {}", self.node.partition, self.k)));
        }
        if self.fragment_size == 0 {
            return Err(StoreError::InvalidHeader("fragment size is zero".into()));
        }
        Ok(())
    }
}

pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

/// Serializes a shard. The header's CRC field is recomputed from `payload`.
pub fn write_shard(header: &ShardHeader, payload: &Packet) -> Result<Vec<u8>, StoreError> {
    header.validate()?;
    if payload.len() != header.fragment_size as usize {
        return Err(StoreError::InvalidHeader(format!(
            "payload is {} bytes but fragment size is {}",
            payload.len(),
            header.fragment_size
        )));
    }
    let partition = u16::try_from(header.node.partition).expect("validated against k");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&header.k.to_le_bytes());
    out.push(header.node.role as u8);
    out.extend_from_slice(&partition.to_le_bytes());
    out.extend_from_slice(&header.stripe_index.to_le_bytes());
    out.extend_from_slice(&header.fragment_size.to_le_bytes());
    out.extend_from_slice(&header.original_file_len.to_le_bytes());
    out.extend_from_slice(&crc32(payload.as_bytes()).to_le_bytes());
    out.extend_from_slice(payload.as_bytes());
    Ok(out)
}

pub fn read_shard(bytes: &[u8]) -> Result<(ShardHeader, Packet), StoreError> {
    if bytes.len() < HEADER_LEN {
        return Err(StoreError::Truncated { needed: HEADER_LEN, found: bytes.len() });
    }
    if bytes[0..4] != MAGIC {
        return Err(StoreError::BadMagic([bytes[0], bytes[1], bytes[2], bytes[3]]));
    }
    if bytes[4] != VERSION {
        return Err(StoreError::UnsupportedVersion(bytes[4]));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let role = match bytes[7] {
        0 => Role::Systematic,
        1 => Role::Parity,
        other => return Err(StoreError::InvalidHeader(format!("role byte {other}"))),
    };
    let header = ShardHeader {
        k: u16_at(5),
        node: NodeId { partition: u16_at(8) as usize, role },
        stripe_index: u32_at(10),
        fragment_size: u32_at(14),
        original_file_len: u64::from_le_bytes(bytes[18..26].try_into().unwrap()),
        payload_crc32: u32_at(26),
    };
    header.validate()?;
    let expected_len = HEADER_LEN + header.fragment_size as usize;
    if bytes.len() < expected_len {
        return Err(StoreError::Truncated { needed: expected_len, found: bytes.len() });
    }
    if bytes.len() > expected_len {
        return Err(StoreError::TrailingData { expected: expected_len, found: bytes.len() });
    }
    let payload = &bytes[HEADER_LEN..];
    let actual = crc32(payload);
    if actual != header.payload_crc32 {
        return Err(StoreError::CrcMismatch { expected: header.payload_crc32, actual });
    }
    Ok((header, Packet::from(payload)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(fragment_size: u32) -> ShardHeader {
        ShardHeader {
            k: 5,
            node: NodeId::parity(2),
            stripe_index: 7,
            fragment_size,
            original_file_len: 1234,
            payload_crc32: 0,
        }
    }

    #[test]
    fn layout_is_fixed() {
        let bytes = write_shard(&header(3), &Packet::new(vec![1, 2, 3])).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 3);
        assert_eq!(
            &bytes[..26],
            &[
                b'N', b'M', b'D', b'S', 1, 5, 0, 1, 2, 0, 7, 0, 0, 0, 3, 0, 0, 0, 0xD2, 0x04, 0, 0, 0, 0, 0, 0
            ]
        );
        assert_eq!(&bytes[26..30], &crc32(&[1, 2, 3]).to_le_bytes());
        // CRC-32/IEEE check value
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn error_kinds() {
        let bytes = write_shard(&header(4), &Packet::new(vec![9; 4])).unwrap();

        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + 1] ^= 0x10;
        assert!(matches!(read_shard(&flipped), Err(StoreError::CrcMismatch { .. })));

        assert!(matches!(read_shard(&bytes[..20]), Err(StoreError::Truncated { needed: 30, found: 20 })));
        assert!(matches!(read_shard(&bytes[..32]), Err(StoreError::Truncated { needed: 34, found: 32 })));

        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(read_shard(&magic), Err(StoreError::BadMagic(_))));

        let mut version = bytes.clone();
        version[4] = 2;
        assert!(matches!(read_shard(&version), Err(StoreError::UnsupportedVersion(2))));

        let mut role = bytes.clone();
        role[7] = 4;
        assert!(matches!(read_shard(&role), Err(StoreError::InvalidHeader(_))));

        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(read_shard(&long), Err(StoreError::TrailingData { .. })));

        let mut bad = header(4);
        bad.node = NodeId::systematic(5);
        assert!(write_shard(&bad, &Packet::new(vec![0; 4])).is_err());
        assert!(write_shard(&header(4), &Packet::new(vec![0; 3])).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(
            k in 2u16..=64,
            part in 0usize..64,
            parity in any::<bool>(),
            stripe_index in any::<u32>(),
            original_file_len in any::<u64>(),
            payload in prop::collection::vec(any::<u8>(), 1..128),
        ) {
            let partition = part % k as usize;
            let node = if parity { NodeId::parity(partition) } else { NodeId::systematic(partition) };
            let h = ShardHeader {
                k, node, stripe_index, fragment_size: payload.len() as u32, original_file_len,
                payload_crc32: crc32(&payload),
            };
            let packet = Packet::new(payload);
            let bytes = write_shard(&h, &packet).unwrap();
            let (h2, p2) = read_shard(&bytes).unwrap();
            prop_assert_eq!(h2, h);
            prop_assert_eq!(&p2, &packet);
            prop_assert_eq!(write_shard(&h2, &p2).unwrap(), bytes);
        }
    }
}
