/**
 * Keyboard swerve input. Left/right arrows map to LEFT/RIGHT; neither or
 * both pressed maps to NONE (no ambiguous simultaneous input). An ACTION
 * goes out on every key state change and at least every 100 ms regardless
 * (the server's realtime control is sticky, so the keepalive reasserts it).
 */

import type { Control } from './protocol.js'

export const KEEPALIVE_MS = 100

export class InputPump {
  private left = false
  private right = false
  private enabled = true

  constructor(private readonly emit: (control: Control) => void) {}

  control(): Control {
    if (this.left === this.right) return 'NONE'
    return this.left ? 'LEFT' : 'RIGHT'
  }

  setKey(key: 'left' | 'right', down: boolean): void {
    if (!this.enabled) return
    const before = this.control()
    if (key === 'left') this.left = down
    else this.right = down
    if (this.control() !== before) this.emit(this.control())
  }

  /** Call on a <=100 ms interval while an episode is running. */
  keepalive(): void {
    if (this.enabled) this.emit(this.control())
  }

  disable(): void {
    this.enabled = false
  }

  enable(): void {
    this.enabled = true
  }
}
