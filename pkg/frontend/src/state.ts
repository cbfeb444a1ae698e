/** UI state machine, kept free of DOM so the flow is unit-testable.
 *
 * All reviewer state lives on the server; this machine only tracks what the
 * current screen shows, so a page reload loses nothing that was recorded.
 */
import { ApiError, ReviewApi, Task, VerdictAction } from './api'

export type Screen =
  | { kind: 'loading' }
  | { kind: 'task'; task: Task; browserOpen: boolean; selected: string | null }
  | { kind: 'done' }
  | { kind: 'error'; message: string }

export interface SessionEvents {
  changed(screen: Screen): void
  notice?(message: string): void
}

export class Session {
  screen: Screen = { kind: 'loading' }

  constructor(
    readonly api: ReviewApi,
    readonly annotator: string,
    readonly events: SessionEvents,
  ) {}

  private show(screen: Screen) {
    this.screen = screen
    this.events.changed(screen)
  }

  async advance(): Promise<void> {
    this.show({ kind: 'loading' })
    try {
      const next = await this.api.nextTask(this.annotator)
      if (next.kind === 'done') {
        this.show({ kind: 'done' })
      } else {
        this.show({ kind: 'task', task: next.task, browserOpen: false, selected: null })
      }
    } catch (error) {
      this.show({ kind: 'error', message: describe(error) })
    }
  }

  /** accept/reject immediately; relabel opens the browser until a path is chosen. */
  async act(action: VerdictAction): Promise<void> {
    if (this.screen.kind !== 'task') return
    const { task, selected } = this.screen
    if (action === 'relabel' && selected === null) {
      this.show({ ...this.screen, browserOpen: true })
      return
    }
    try {
      const result = await this.api.submitVerdict({
        task_id: task.task_id,
        annotator_id: this.annotator,
        action,
        ...(action === 'relabel' ? { label: selected as string } : {}),
      })
      if (result.status === 409) {
        this.events.notice?.('already judged, skipping ahead')
      }
      await this.advance()
    } catch (error) {
      this.show({ kind: 'error', message: describe(error) })
    }
  }

  select(path: string): void {
    if (this.screen.kind !== 'task') return
    this.show({ ...this.screen, selected: path, browserOpen: true })
  }

  toggleBrowser(): void {
    if (this.screen.kind !== 'task') return
    this.show({ ...this.screen, browserOpen: !this.screen.browserOpen })
  }

  async retry(): Promise<void> {
    await this.advance()
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `service answered ${error.status}: ${error.message}`
  if (error instanceof Error) return `network error: ${error.message}`
  return 'unexpected error'
}
