use std::collections::BTreeMap;

use crate::codec::{CodeParams, Packet};

use super::{FileManifest, StoreError};

/// Cuts `data` into stripes of k fragments, zero-padding the last stripe.
/// An empty input still yields one all-zero stripe.
pub fn split_file(data: &[u8], params: &CodeParams, fragment_size: usize) -> Result<(Vec<Vec<Packet>>, FileManifest), StoreError> {
    if fragment_size == 0 {
        return Err(StoreError::InvalidFragmentSize);
    }
    let k = params.k();
    let stripe_count = FileManifest::expected_stripe_count(data.len() as u64, k, fragment_size);
    let stripe_count = u32::try_from(stripe_count).map_err(|_| StoreError::TooManyStripes)?;
    let stripe_bytes = k * fragment_size;
    let stripes = (0..stripe_count as usize)
        .map(|s| {
            (0..k)
                .map(|i| {
                    let start = (s * stripe_bytes + i * fragment_size).min(data.len());
                    let end = (start + fragment_size).min(data.len());
                    let mut bytes = data[start..end].to_vec();
                    bytes.resize(fragment_size, 0);
                    Packet::new(bytes)
                })
                .collect()
        })
        .collect();
    let manifest = FileManifest {
        basename: String::new(),
        k,
        fragment_size,
        stripe_count,
        original_file_len: data.len() as u64,
        checksums: BTreeMap::new(),
    };
    Ok((stripes, manifest))
}

/// Concatenates decoded stripes and drops the padding.
pub fn assemble_file(stripes: &BTreeMap<u32, Vec<Packet>>, manifest: &FileManifest) -> Result<Vec<u8>, StoreError> {
    if stripes.len() != manifest.stripe_count as usize {
        return Err(StoreError::StripeCountMismatch { expected: manifest.stripe_count, found: stripes.len() });
    }
    let mut out = Vec::with_capacity((manifest.stripe_count as u64 * manifest.stripe_bytes()) as usize);
    for index in 0..manifest.stripe_count {
        let fragments = stripes.get(&index).ok_or(StoreError::MissingStripe(index))?;
        if fragments.len() != manifest.k || fragments.iter().any(|f| f.len() != manifest.fragment_size) {
            return Err(StoreError::MalformedStripe(index));
        }
        fragments.iter().for_each(|f| out.extend_from_slice(f.as_bytes()));
    }
    out.truncate(manifest.original_file_len as usize);
    Ok(out)
}
