use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segames_core::lobby::{LeaveOutcome, Zone};
use segames_core::types::{GameType, PlayerId};

use crate::ensure;

const SEQUENCES: usize = 1_200;
const OPS_PER_SEQUENCE: usize = 60;

/// Straight-line model of first-fit matchmaking.
#[derive(Debug, Clone)]
struct ModelRoom {
    number: u64,
    game: GameType,
    players: Vec<String>,
    started: bool,
}

fn capacity(g: GameType) -> (usize, usize) {
    match g {
        GameType::MiBoard => (3, 4),
        GameType::Showdown => (2, 2),
    }
}

#[derive(Default)]
struct Model {
    rooms: Vec<ModelRoom>,
    created: u64,
}

impl Model {
    fn join(&mut self, game: GameType, player: &str) -> Result<u64, ()> {
        if self.rooms.iter().any(|r| r.players.iter().any(|p| p == player)) {
            return Err(());
        }
        let max = capacity(game).1;
        for r in self.rooms.iter_mut() {
            if r.game == game && !r.started && r.players.len() < max {
                r.players.push(player.to_string());
                return Ok(r.number);
            }
        }
        self.created += 1;
        self.rooms.push(ModelRoom {
            number: self.created,
            game,
            players: vec![player.to_string()],
            started: false,
        });
        Ok(self.created)
    }
}

fn compare(zone: &Zone, model: &Model) -> Result<(), String> {
    ensure(zone.rooms().len() == model.rooms.len(), || {
        format!("{} rooms in zone, {} in model", zone.rooms().len(), model.rooms.len())
    })?;
    for (z, m) in zone.rooms().iter().zip(&model.rooms) {
        let players: Vec<&str> = z.players.iter().map(PlayerId::as_str).collect();
        ensure(
            z.number == m.number && z.game_type == m.game && z.started == m.started && players == m.players,
            || format!("zone room {z:?} differs from model {m:?}"),
        )?;
        let (_, max) = capacity(z.game_type);
        ensure(z.players.len() <= max, || format!("{} over capacity", z.id))?;
    }
    Ok(())
}

pub fn run() -> crate::Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10BB);
    let mut joins = 0;
    let mut starts = 0;
    let mut refused_after_start = 0;
    for _ in 0..SEQUENCES {
        let mut zone = Zone::new("z");
        let mut model = Model::default();
        for _ in 0..OPS_PER_SEQUENCE {
            let before = zone.clone();
            match rng.gen_range(0..10) {
                0..=4 => {
                    let name = format!("p{}", rng.gen_range(0..14));
                    let game = if rng.gen_bool(0.5) {
                        GameType::MiBoard
                    } else {
                        GameType::Showdown
                    };
                    let got = zone.find_or_create_room(game, PlayerId::new(name.clone()).unwrap());
                    let want = model.join(game, &name);
                    ensure(got.is_ok() == want.is_ok(), || {
                        format!("join {name}: zone {got:?}, model {want:?}")
                    })?;
                    if let (Ok(room), Ok(n)) = (&got, want) {
                        joins += 1;
                        ensure(room.as_str() == format!("room-{n}"), || {
                            format!("joined {room}, first fit is room-{n}")
                        })?;
                    }
                }
                5..=6 => {
                    if model.rooms.is_empty() {
                        continue;
                    }
                    let i = rng.gen_range(0..model.rooms.len());
                    let id = zone.rooms()[i].id.clone();
                    let m = &mut model.rooms[i];
                    let got = zone.try_start(&id);
                    if m.started {
                        ensure(got.is_err(), || format!("restarting {id} succeeded"))?;
                    } else {
                        let can = m.players.len() >= capacity(m.game).0;
                        ensure(got == Ok(can), || format!("start {id}: {got:?}, expected {can}"))?;
                        m.started = can;
                        starts += usize::from(can);
                    }
                }
                7..=8 => {
                    let members: Vec<(usize, String)> = model
                        .rooms
                        .iter()
                        .enumerate()
                        .flat_map(|(i, r)| r.players.iter().map(move |p| (i, p.clone())))
                        .collect();
                    if members.is_empty() {
                        continue;
                    }
                    let (i, p) = members[rng.gen_range(0..members.len())].clone();
                    let id = zone.rooms()[i].id.clone();
                    let got = zone.leave_room(&id, &PlayerId::new(p.clone()).unwrap());
                    let m = &mut model.rooms[i];
                    m.players.retain(|x| x != &p);
                    let want = if m.started {
                        LeaveOutcome::DelegatedToEngine
                    } else if m.players.is_empty() {
                        model.rooms.remove(i);
                        LeaveOutcome::RoomDeleted
                    } else {
                        LeaveOutcome::Left
                    };
                    ensure(got == Ok(want.clone()), || {
                        format!("leave {p}: {got:?}, expected {want:?}")
                    })?;
                }
                _ => {
                    if let Some(i) = model.rooms.iter().position(|r| r.started) {
                        let id = zone.rooms()[i].id.clone();
                        ensure(zone.close_room(&id).is_some(), || format!("close {id} failed"))?;
                        model.rooms.remove(i);
                    }
                }
            }
            compare(&zone, &model)?;
            // No join after start: a started room never gains a player.
            for r in zone.rooms().iter().filter(|r| r.started) {
                if let Some(old) = before.room(&r.id).filter(|o| o.started) {
                    ensure(r.players.iter().all(|p| old.players.contains(p)), || {
                        format!("{} gained a player after start", r.id)
                    })?;
                    refused_after_start += 1;
                }
            }
        }
    }
    Ok(format!(
        "{SEQUENCES} sequences x {OPS_PER_SEQUENCE} ops agree with first-fit model; {joins} joins, {starts} starts, {refused_after_start} started-room checks"
    ))
}
