import type { ClientMsg, ServerMsg } from "./protocol.js";

export interface Channel {
  send(msg: ClientMsg): boolean;
  close(): void;
}

/**
 * Thin WebSocket wrapper for /v1/session.  send() reports whether the
 * socket accepted the message so callers (the gaze proxy) can buffer.
 */
export function connectSession(
  url: string,
  onMsg: (msg: ServerMsg) => void,
  onState: (connected: boolean) => void
): Channel {
  const ws = new WebSocket(url);
  ws.onopen = () => onState(true);
  ws.onclose = () => onState(false);
  ws.onerror = () => onState(false);
  ws.onmessage = (ev) => {
    try {
      onMsg(JSON.parse(ev.data) as ServerMsg);
    } catch {
      // ignore unparseable frames; the server never sends them
    }
  };
  return {
    send(msg: ClientMsg): boolean {
      if (ws.readyState !== WebSocket.OPEN) return false;
      ws.send(JSON.stringify(msg));
      return true;
    },
    close() {
      ws.close();
    },
  };
}
