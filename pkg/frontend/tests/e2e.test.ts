/**
 * Scripted subject session against the real server: load the menu from
 * GET /scenarios, pick a single scenario, connect over a real WebSocket,
 * hold the right arrow, and ride it to the results screen. The server's
 * decision log must show exactly one record, and every message this client
 * emitted was schema-validated on its way out.
 */

import { spawn, type ChildProcess } from 'node:child_process'
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'
import { WebSocket } from 'ws'
import { afterAll, beforeAll, describe, expect, it } from 'vitest'

import { InputPump } from '../src/input.js'
import { buildHelloConfig, fetchListing } from '../src/menu.js'
import { makeAction, makeHello, type Message } from '../src/protocol.js'
import { initialState, reduce, type SessionState } from '../src/session.js'
import { wrapWebSocket, type Transport } from '../src/transport.js'

const PED_ROW = Array.from({ length: 13 }, (_, i) => {
  const x = -6 + i
  const group = x < 0 ? 1 : 2
  return `  ped name=p${String(i).padStart(2, '0')} group=${group} x=${x} y=12 age=${20 + i} gender=male`
}).join('\n')

const FIXTURE = `scenario 0 "e2e row"
  spawn x=0 y=0 heading_deg=0 speed=5
  target x=0 y=12
  corridor x_min=-6 x_max=6 y_end=30
  group id=1 side=left
  group id=2 side=right
${PED_ROW}
end
`

let server: ChildProcess
let baseUrl = ''
let logPath = ''

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), 'trolleysim-ui-'))
  const fixturePath = join(dir, 'e2e.trly')
  logPath = join(dir, 'decisions.tsv')
  writeFileSync(fixturePath, FIXTURE)
  server = spawn(
    'python3',
    ['-m', 'trolleysim.cli', 'serve', '--file', fixturePath,
     '--addr', '127.0.0.1:0', '--out', logPath],
    { env: { ...process.env, TROLLEYSIM_DT: '0.01', PYTHONUNBUFFERED: '1' } },
  )
  baseUrl = await new Promise<string>((resolve, reject) => {
    let buffer = ''
    const timer = setTimeout(() => reject(new Error(`server never came up: ${buffer}`)), 20000)
    server.stdout!.on('data', (chunk: Buffer) => {
      buffer += chunk.toString()
      const match = buffer.match(/serving .* on ([\d.]+):(\d+)/)
      if (match) {
        clearTimeout(timer)
        resolve(`http://${match[1]}:${match[2]}`)
      }
    })
    server.stderr!.on('data', (chunk: Buffer) => { buffer += chunk.toString() })
    server.on('exit', (code) => reject(new Error(`server exited ${code}: ${buffer}`)))
  })
})

afterAll(() => {
  server?.kill('SIGINT')
})

describe('scripted subject session', () => {
  it('menu -> single scenario -> hold RIGHT -> collision -> results; server logs 1 record', async () => {
    // start menu: the scenario list comes from the server
    const listing = await fetchListing(baseUrl)
    expect(listing.files).toHaveLength(1)
    const file = listing.files[0]
    expect(file.scenarios).toEqual([{ test_num: 0, name: 'e2e row' }])

    let state: SessionState = initialState()
    const outbound: Message[] = []
    let transport!: Transport
    const done = new Promise<void>((resolve, reject) => {
      const socket = new WebSocket(baseUrl.replace('http', 'ws') + '/ws')
      const timer = setTimeout(() => reject(new Error(`stuck in phase ${state.phase}`)), 25000)
      socket.addEventListener('open', () => {
        transport = wrapWebSocket(socket as never, {
          onMessage: (msg) => {
            state = reduce(state, msg)
            if (state.phase === 'results' || state.phase === 'error') {
              clearTimeout(timer)
              resolve()
            }
          },
          onClose: () => undefined,
        })
        const send = (msg: Message) => {
          outbound.push(msg)
          transport.send(msg)
        }
        send(makeHello(buildHelloConfig(file.id, { testNum: 0 })))
        const pump = new InputPump((control) =>
          send(makeAction(state.latest?.tick ?? 0, control)),
        )
        pump.setKey('right', true) // hold RIGHT for the whole episode
        const keepalive = setInterval(() => {
          if (state.phase === 'error' || state.phase === 'results') clearInterval(keepalive)
          else pump.keepalive()
        }, 100)
      })
      socket.addEventListener('error', (e) => reject(new Error(String(e))))
    })
    await done

    // results screen: one row per record, and the collision overlay fired
    expect(state.phase).toBe('results')
    expect(state.collisionText).toMatch(/^Collided with /)
    expect(state.results).toHaveLength(1)
    expect(state.results[0].outcome).toMatch(/^group:/)
    expect(state.results[0].subject_role).toBe('human')
    expect(state.latest).not.toBeNull() // rendered state came from the server

    // the server-side sink saw exactly the same single decision
    const logLines = readFileSync(logPath, 'utf-8').trim().split('\n')
    expect(logLines).toHaveLength(1)
    expect(logLines[0]).toContain(`\t${state.results[0].outcome}\t`)

    // every outbound message was one of ours and schema-valid by construction
    expect(outbound.length).toBeGreaterThan(5)
    expect(new Set(outbound.map((m) => m.type))).toEqual(new Set(['HELLO', 'ACTION']))
    transport.close()
  })

  it('a second session in mode all also completes (menu default path)', async () => {
    const listing = await fetchListing(baseUrl)
    let state: SessionState = initialState()
    await new Promise<void>((resolve, reject) => {
      const socket = new WebSocket(baseUrl.replace('http', 'ws') + '/ws')
      const timer = setTimeout(() => reject(new Error(`stuck in phase ${state.phase}`)), 25000)
      socket.addEventListener('open', () => {
        const transport = wrapWebSocket(socket as never, {
          onMessage: (msg) => {
            state = reduce(state, msg)
            if (state.phase === 'results') {
              clearTimeout(timer)
              transport.close()
              resolve()
            }
          },
          onClose: () => undefined,
        })
        transport.send(makeHello(buildHelloConfig(listing.files[0].id, 'all')))
        const pump = new InputPump((c) => transport.send(makeAction(state.latest?.tick ?? 0, c)))
        pump.setKey('left', true)
        setInterval(() => pump.keepalive(), 100).unref()
      })
    })
    expect(state.results).toHaveLength(1) // the file has one scenario
    expect(state.results[0].outcome).toBe('group:1') // held LEFT into the left group
  })
})
