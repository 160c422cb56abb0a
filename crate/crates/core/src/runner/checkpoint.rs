//! Run checkpoints: the learned reward ensemble and the policy network.
//!
//! Layout, little-endian: magic `SURFCKPT`, u32 version, env name string,
//! u32 flags (bit 0 ensemble present, bit 1 actor present), then the
//! present parts in that order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{new_agent, AgentConfig, SacAgent};
use crate::codec::{Reader, Writer};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::ndmath::Mlp;
use crate::reward::{read_ensemble, read_mlp, write_ensemble, write_mlp, RewardEnsemble};

const MAGIC: &[u8; 8] = b"SURFCKPT";
const VERSION: u32 = 1;
const HAS_ENSEMBLE: u32 = 1;
const HAS_ACTOR: u32 = 2;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub env: EnvKind,
    pub ensemble: Option<RewardEnsemble>,
    pub actor: Option<Mlp>,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, out: W) -> Result<W> {
        let mut w = Writer::new(out);
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.str(self.env.name())?;
        let flags = (self.ensemble.is_some() as u32 * HAS_ENSEMBLE) | (self.actor.is_some() as u32 * HAS_ACTOR);
        w.u32(flags)?;
        if let Some(e) = &self.ensemble {
            write_ensemble(&mut w, e)?;
        }
        if let Some(a) = &self.actor {
            write_mlp(&mut w, a)?;
        }
        w.finish()
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut r = Reader::new(input);
        r.expect_magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let env: EnvKind = r.str()?.parse().map_err(|e: Error| Error::Format(e.to_string()))?;
        let flags = r.u32()?;
        if flags & !(HAS_ENSEMBLE | HAS_ACTOR) != 0 {
            return Err(Error::Format(format!("unknown checkpoint flags {flags:#x}")));
        }
        let ensemble = if flags & HAS_ENSEMBLE != 0 { Some(read_ensemble(&mut r)?) } else { None };
        let actor = if flags & HAS_ACTOR != 0 { Some(read_mlp(&mut r)?) } else { None };
        let spec = env.spec();
        if let Some(e) = &ensemble {
            if e.state_dim() != spec.state_dim || e.action_dim() != spec.action_dim {
                return Err(Error::Format(format!("reward ensemble does not fit {}", spec.name)));
            }
        }
        if let Some(a) = &actor {
            if a.input_dim() != spec.state_dim || a.output_dim() != 2 * spec.action_dim {
                return Err(Error::Format(format!("actor does not fit {}", spec.name)));
            }
        }
        Ok(Checkpoint { env, ensemble, actor })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }

    /// An agent acting with the stored policy. Critics are fresh.
    pub fn agent(&self) -> Result<SacAgent> {
        let actor = self
            .actor
            .clone()
            .ok_or_else(|| Error::contract("checkpoint has no policy"))?;
        let env = self.env.make();
        let mut agent = new_agent(&env, AgentConfig::default(), &mut ChaCha8Rng::seed_from_u64(0))?;
        agent.set_actor(actor)?;
        Ok(agent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::RewardNetConfig;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let env = EnvKind::PendulumSwingUp;
        let spec = env.spec();
        let cfg = RewardNetConfig { hidden: 8, hidden_layers: 2 };
        let ensemble = RewardEnsemble::new(spec.state_dim, spec.action_dim, 2, &cfg, &mut rng).unwrap();
        let agent = new_agent(&env.make(), AgentConfig { hidden: 8, ..AgentConfig::default() }, &mut rng).unwrap();
        Checkpoint { env, ensemble: Some(ensemble), actor: Some(agent.actor().clone()) }
    }

    #[test]
    fn round_trip_preserves_behaviour() {
        let ck = sample();
        let bytes = ck.write(Vec::new()).unwrap();
        let back = Checkpoint::read(bytes.as_slice()).unwrap();
        assert_eq!(back.env, ck.env);
        let s = [0.3, -0.9, 1.5];
        let (e0, e1) = (ck.ensemble.as_ref().unwrap(), back.ensemble.as_ref().unwrap());
        assert_eq!(e0.ensemble_reward(&s, &[0.2]).unwrap(), e1.ensemble_reward(&s, &[0.2]).unwrap());
        let (a0, a1) = (ck.agent().unwrap(), back.agent().unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(a0.act(&s, true, &mut rng).unwrap(), a1.act(&s, true, &mut rng).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let mut bytes = sample().write(Vec::new()).unwrap();
        assert!(matches!(Checkpoint::read(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        bytes[8] = 9;
        assert!(matches!(Checkpoint::read(bytes.as_slice()), Err(Error::Format(_))));
        assert!(matches!(Checkpoint::read(&b"NOTACKPT"[..]), Err(Error::Format(_))));
        let empty = Checkpoint { env: EnvKind::PointMassReach, ensemble: None, actor: None };
        let back = Checkpoint::read(empty.write(Vec::new()).unwrap().as_slice()).unwrap();
        assert!(back.agent().is_err());
    }
}
