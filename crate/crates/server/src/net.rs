//! Network front end for the sans-IO [`Server`].
//!
//! One dedicated thread owns the `Server` and the event log; transports talk
//! to it over a channel. Each connection gets an unbounded outbound queue of
//! frames. Two transports carry the same newline-delimited frames: raw TCP,
//! one frame per line, and a WebSocket endpoint at `/play`, one frame per
//! text message.

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use segames_core::server::{ConnId, Outgoing, Server};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio_util::codec::{Framed, LinesCodec};

/// Longest inbound line a transport accepts before dropping the connection.
pub const MAX_LINE_BYTES: usize = 64 * 1024;

pub const WS_PATH: &str = "/play";

enum Command {
    Connect(mpsc::UnboundedSender<String>, oneshot::Sender<ConnId>),
    Frame(ConnId, String),
    Gone(ConnId),
    Stop,
}

/// Cloneable handle transports use to reach the game thread.
#[derive(Clone)]
pub struct Hub {
    tx: mpsc::UnboundedSender<Command>,
}

impl Hub {
    async fn connect(&self) -> Option<(ConnId, mpsc::UnboundedReceiver<String>)> {
        let (out_tx, out_rx) = mpsc::unbounded_channel();
        let (id_tx, id_rx) = oneshot::channel();
        self.tx.send(Command::Connect(out_tx, id_tx)).ok()?;
        let id = id_rx.await.ok()?;
        Some((id, out_rx))
    }

    fn frame(&self, conn: ConnId, line: String) {
        let _ = self.tx.send(Command::Frame(conn, line));
    }

    fn gone(&self, conn: ConnId) {
        let _ = self.tx.send(Command::Gone(conn));
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Runs the game loop on its own thread so log writes, which block on the
/// file system, never stall the transport runtime.
fn spawn_game_thread(mut server: Server, mut rx: mpsc::UnboundedReceiver<Command>) -> std::thread::JoinHandle<Server> {
    std::thread::Builder::new()
        .name("segames-game".into())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_time()
                .build()
                .expect("game thread runtime");
            rt.block_on(async move {
                let mut outboxes: HashMap<ConnId, mpsc::UnboundedSender<String>> = HashMap::new();
                loop {
                    let wait = server
                        .next_deadline()
                        .map(|at| Duration::from_millis(at.saturating_sub(now_ms())));
                    let cmd = tokio::select! {
                        cmd = rx.recv() => cmd,
                        _ = tokio::time::sleep(wait.unwrap_or_default()), if wait.is_some() => {
                            let out = server.advance_to(now_ms());
                            deliver(&mut outboxes, out);
                            continue;
                        }
                    };
                    let now = now_ms();
                    let mut out = server.advance_to(now);
                    match cmd {
                        None | Some(Command::Stop) => break,
                        Some(Command::Connect(outbox, reply)) => {
                            let id = server.connect();
                            outboxes.insert(id, outbox);
                            if reply.send(id).is_err() {
                                outboxes.remove(&id);
                                out.extend(server.disconnect(now, &[id]));
                            }
                        }
                        Some(Command::Frame(conn, line)) => {
                            tracing::debug!(conn, %line, "frame in");
                            out.extend(server.handle_frame(now, conn, &line));
                        }
                        Some(Command::Gone(conn)) => {
                            outboxes.remove(&conn);
                            out.extend(server.disconnect(now, &[conn]));
                        }
                    }
                    deliver(&mut outboxes, out);
                }
                server
            })
        })
        .expect("spawn game thread")
}

fn deliver(outboxes: &mut HashMap<ConnId, mpsc::UnboundedSender<String>>, out: Vec<Outgoing>) {
    for o in out {
        if let Some(tx) = outboxes.get(&o.conn) {
            // A closed queue means the transport is tearing down and a Gone
            // command is already on its way.
            let _ = tx.send(o.frame.into_string());
        }
    }
}

async fn serve_tcp_conn(hub: Hub, stream: TcpStream, peer: SocketAddr) {
    let Some((conn, mut outbox)) = hub.connect().await else {
        return;
    };
    tracing::info!(conn, %peer, "tcp connected");
    let (mut sink, mut lines) = Framed::new(stream, LinesCodec::new_with_max_length(MAX_LINE_BYTES)).split();
    let writer = tokio::spawn(async move {
        while let Some(frame) = outbox.recv().await {
            if sink.send(frame).await.is_err() {
                break;
            }
        }
    });
    while let Some(line) = lines.next().await {
        match line {
            Ok(line) => hub.frame(conn, line.strip_suffix('\r').unwrap_or(&line).to_string()),
            Err(e) => {
                tracing::info!(conn, error = %e, "dropping tcp connection");
                break;
            }
        }
    }
    hub.gone(conn);
    writer.abort();
    tracing::info!(conn, "tcp closed");
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(hub): State<Hub>) -> impl IntoResponse {
    ws.max_message_size(MAX_LINE_BYTES)
        .on_upgrade(move |socket| serve_ws_conn(hub, socket))
}

async fn serve_ws_conn(hub: Hub, socket: WebSocket) {
    let Some((conn, mut outbox)) = hub.connect().await else {
        return;
    };
    tracing::info!(conn, "websocket connected");
    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(frame) = outbox.recv().await {
            if sink.send(WsMessage::Text(frame)).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            // A message normally holds one frame; a client may also batch
            // several newline-terminated frames into one message.
            WsMessage::Text(text) => {
                for line in text.split('\n').filter(|l| !l.is_empty()) {
                    hub.frame(conn, line.strip_suffix('\r').unwrap_or(line).to_string());
                }
            }
            WsMessage::Close(_) => break,
            WsMessage::Binary(_) => {
                tracing::info!(conn, "binary websocket message, closing");
                break;
            }
            WsMessage::Ping(_) | WsMessage::Pong(_) => {}
        }
    }
    hub.gone(conn);
    writer.abort();
    tracing::info!(conn, "websocket closed");
}

pub fn router(hub: Hub) -> Router {
    Router::new().route(WS_PATH, get(ws_upgrade)).with_state(hub)
}

/// A running server. Dropping it without [`Running::shutdown`] leaves the
/// listener tasks to die with the runtime.
pub struct Running {
    pub tcp_addr: Option<SocketAddr>,
    pub ws_addr: Option<SocketAddr>,
    hub: Hub,
    tasks: Vec<JoinHandle<()>>,
    game: std::thread::JoinHandle<Server>,
}

impl Running {
    /// Stops accepting connections and returns the server state.
    pub async fn shutdown(self) -> Server {
        for t in &self.tasks {
            t.abort();
        }
        let _ = self.hub.tx.send(Command::Stop);
        tokio::task::spawn_blocking(move || self.game.join().expect("game thread panicked"))
            .await
            .expect("join game thread")
    }
}

/// Binds the requested listeners and starts serving. Port 0 picks a free port.
pub async fn start(server: Server, tcp: Option<SocketAddr>, ws: Option<SocketAddr>) -> io::Result<Running> {
    let tcp_listener = match tcp {
        Some(a) => Some(TcpListener::bind(a).await?),
        None => None,
    };
    let ws_listener = match ws {
        Some(a) => Some(TcpListener::bind(a).await?),
        None => None,
    };
    let (tx, rx) = mpsc::unbounded_channel();
    let hub = Hub { tx };
    let game = spawn_game_thread(server, rx);
    let mut tasks = Vec::new();
    let mut running = Running {
        tcp_addr: None,
        ws_addr: None,
        hub: hub.clone(),
        tasks: Vec::new(),
        game,
    };
    if let Some(listener) = tcp_listener {
        running.tcp_addr = Some(listener.local_addr()?);
        let hub = hub.clone();
        tasks.push(tokio::spawn(async move {
            loop {
                match listener.accept().await {
                    Ok((stream, peer)) => {
                        let _ = stream.set_nodelay(true);
                        tokio::spawn(serve_tcp_conn(hub.clone(), stream, peer));
                    }
                    Err(e) => tracing::warn!(error = %e, "tcp accept failed"),
                }
            }
        }));
    }
    if let Some(listener) = ws_listener {
        running.ws_addr = Some(listener.local_addr()?);
        let app = router(hub.clone());
        tasks.push(tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).await {
                tracing::error!(error = %e, "websocket listener stopped");
            }
        }));
    }
    running.tasks = tasks;
    Ok(running)
}
