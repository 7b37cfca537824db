/**
 * Message transports. The browser uses a WebSocket (one JSON message per
 * text frame); every outbound message is schema-validated before it leaves
 * the client. The payloads are identical to the server's raw TCP line
 * protocol, so tests can drive the same session logic over either.
 */

import { decodeMessage, validateOutbound, type Message } from './protocol.js'

export interface Transport {
  send(msg: Message): void
  close(): void
}

export interface TransportEvents {
  onMessage(msg: Message): void
  onClose(): void
}

interface WebSocketLike {
  send(data: string): void
  close(): void
  addEventListener(type: string, listener: (event: any) => void): void
}

export function wrapWebSocket(socket: WebSocketLike, events: TransportEvents): Transport {
  socket.addEventListener('message', (event: { data: unknown }) => {
    events.onMessage(decodeMessage(String(event.data)))
  })
  socket.addEventListener('close', () => events.onClose())
  socket.addEventListener('error', () => events.onClose())
  return {
    send(msg: Message): void {
      socket.send(JSON.stringify(validateOutbound(msg)))
    },
    close(): void {
      socket.close()
    },
  }
}

export function connectWebSocket(url: string, events: TransportEvents): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const socket = new WebSocket(url)
    socket.addEventListener('open', () => resolve(wrapWebSocket(socket, events)))
    socket.addEventListener('error', () => reject(new Error(`cannot connect to ${url}`)))
  })
}
