//! Minimal typed WebSocket client for `/session/{id}`.

use std::time::Duration;

use futures::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use crate::error::GatewayError;
use crate::protocol::{decode_server, encode, ClientMessage, ServerMessage};

pub struct SessionClient {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl SessionClient {
    pub async fn connect(url: &str) -> Result<Self, GatewayError> {
        let (ws, _) = connect_async(url).await?;
        Ok(Self { ws })
    }

    pub async fn send(&mut self, msg: &ClientMessage) -> Result<(), GatewayError> {
        self.ws.send(Message::Text(encode(msg).into())).await?;
        Ok(())
    }

    /// Next server message; `None` when the server closed the stream.
    pub async fn recv(&mut self) -> Result<Option<ServerMessage>, GatewayError> {
        while let Some(msg) = self.ws.next().await {
            match msg? {
                Message::Text(text) => {
                    return decode_server(&text)
                        .map(Some)
                        .map_err(|e| GatewayError::Protocol(e.to_string()))
                }
                Message::Close(_) => return Ok(None),
                _ => {}
            }
        }
        Ok(None)
    }

    /// Receives until `pred` matches, giving up after `timeout`. Skipped
    /// messages are handed to `seen`.
    pub async fn recv_until(
        &mut self,
        timeout: Duration,
        mut pred: impl FnMut(&ServerMessage) -> bool,
        mut seen: impl FnMut(&ServerMessage),
    ) -> Result<ServerMessage, GatewayError> {
        let fut = async {
            loop {
                match self.recv().await? {
                    Some(m) if pred(&m) => return Ok(m),
                    Some(m) => seen(&m),
                    None => return Err(GatewayError::Protocol("server closed the stream".into())),
                }
            }
        };
        tokio::time::timeout(timeout, fut)
            .await
            .map_err(|_| GatewayError::Protocol(format!("no matching message within {timeout:?}")))?
    }

    pub async fn close(mut self) -> Result<(), GatewayError> {
        self.ws.close(None).await?;
        Ok(())
    }
}
