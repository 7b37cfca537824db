/**
 * Wire protocol types and validation for the trolleysim session protocol
 * (protocol_version 1). Payloads are identical over WebSocket frames and
 * the raw TCP line transport; see ../PROTOCOL.md for the full reference.
 */

export const PROTOCOL_VERSION = 1

export type Control = 'LEFT' | 'NONE' | 'RIGHT'

export interface Message {
  type: string
  protocol_version: number
  [field: string]: unknown
}

// required payload fields per message type, mirroring the protocol reference
export const MESSAGE_SCHEMAS: Record<string, readonly string[]> = {
  HELLO: ['config'],
  WELCOME: ['session_id'],
  SCENARIO_START: ['test_num', 'name', 'corridor', 'spawn', 'target', 'groups', 'actors'],
  STATE: [
    'tick',
    'position',
    'heading',
    'speed',
    'acceleration',
    'collision_impulse_accum',
    'test_num',
  ],
  ACTION: ['tick', 'control'],
  COLLISION: ['tick', 'display'],
  EPISODE_END: ['record'],
  SIM_END: ['records'],
  ERROR: ['code', 'message'],
}

export interface Corridor {
  x_min: number
  x_max: number
  y_end: number
}

export interface ActorPayload {
  name: string
  kind: 'pedestrian' | 'vehicle' | 'prop'
  position: [number, number]
  radius: number
  side: 'left' | 'right'
  age?: number
  gender?: string
  group_id?: number
  group_size?: number
  traits?: string[]
  label?: string
}

export interface ScenarioStartMsg extends Message {
  type: 'SCENARIO_START'
  test_num: number
  name: string
  corridor: Corridor
  spawn: { x: number; y: number; heading: number; speed: number }
  target: [number, number]
  groups: Record<string, 'left' | 'right'>
  actors: ActorPayload[]
}

export interface StateMsg extends Message {
  type: 'STATE'
  tick: number
  position: [number, number]
  heading: number
  speed: number
  acceleration: [number, number]
  collision_impulse_accum: number
  test_num: number
}

export interface DecisionRecord {
  session_id: string
  test_num: number
  outcome: string
  group_member_names: string
  impact_speed: number
  tick: number
  subject_role: string
  scenario_name: string
}

export interface HelloConfig {
  scenario_file?: string
  mode: 'all' | 'single'
  test_num?: number
  pacing: 'realtime'
  role: 'human'
  seed?: number
}

/** Shape-check a message; returns the problems found (empty = valid). */
export function messageProblems(msg: unknown): string[] {
  if (typeof msg !== 'object' || msg === null || Array.isArray(msg)) {
    return ['message is not an object']
  }
  const m = msg as Record<string, unknown>
  const problems: string[] = []
  const schema = MESSAGE_SCHEMAS[String(m.type)]
  if (schema === undefined) {
    problems.push(`unknown message type ${JSON.stringify(m.type)}`)
    return problems
  }
  if (typeof m.protocol_version !== 'number') {
    problems.push('missing protocol_version')
  }
  for (const field of schema) {
    if (!(field in m)) problems.push(`${m.type} is missing field ${field}`)
  }
  return problems
}

/** Throwing validator used on every outbound message (zero-invalid-send). */
export function validateOutbound(msg: Message): Message {
  const problems = messageProblems(msg)
  if (problems.length > 0) {
    throw new Error(`refusing to send invalid message: ${problems.join('; ')}`)
  }
  return msg
}

export function makeHello(config: HelloConfig): Message {
  return validateOutbound({ type: 'HELLO', protocol_version: PROTOCOL_VERSION, config })
}

export function makeAction(tick: number, control: Control): Message {
  return validateOutbound({ type: 'ACTION', protocol_version: PROTOCOL_VERSION, tick, control })
}

export function decodeMessage(raw: string): Message {
  let parsed: unknown
  try {
    parsed = JSON.parse(raw)
  } catch (err) {
    throw new Error(`malformed message: ${String(err)}`)
  }
  const problems = messageProblems(parsed)
  if (problems.length > 0) throw new Error(`malformed message: ${problems.join('; ')}`)
  return parsed as Message
}
