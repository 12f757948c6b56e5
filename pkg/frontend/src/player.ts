/**
 * Playback state for the frame animation: play, pause, scrub, wrap.
 *
 * The player owns only the cursor and the playing flag; scheduling lives in
 * main.ts so this stays synchronous and directly testable.
 */

export class Player {
  cursor = 0;
  playing = false;
  private frameCount: number;

  constructor(frameCount = 0) {
    this.frameCount = Math.max(0, frameCount);
  }

  get frames(): number {
    return this.frameCount;
  }

  setFrameCount(n: number): void {
    this.frameCount = Math.max(0, n);
    this.cursor = this.clamp(this.cursor);
    if (this.frameCount === 0) {
      this.playing = false;
    }
  }

  private clamp(i: number): number {
    if (this.frameCount === 0) {
      return 0;
    }
    return Math.min(Math.max(0, Math.floor(i)), this.frameCount - 1);
  }

  play(): void {
    if (this.frameCount > 0) {
      this.playing = true;
    }
  }

  pause(): void {
    this.playing = false;
  }

  toggle(): void {
    if (this.playing) {
      this.pause();
    } else {
      this.play();
    }
  }

  /** Advance one frame, wrapping to the start after the last one. */
  tick(): number {
    if (this.frameCount > 0) {
      this.cursor = (this.cursor + 1) % this.frameCount;
    }
    return this.cursor;
  }

  scrubTo(i: number): number {
    this.cursor = this.clamp(i);
    return this.cursor;
  }
}
