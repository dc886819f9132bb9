import { describe, expect, it } from "vitest";
import {
  axisAngle,
  forwardAxis,
  identityPose,
  normalize,
  poseApproxEqual,
  poseToWire,
  quatMultiply,
  rightAxis,
  rotate,
  translate,
  yaw,
  pitch,
} from "../src/pose.js";

describe("quaternion math", () => {
  it("normalizes", () => {
    const q = normalize([2, 0, 0, 0]);
    expect(q).toEqual([1, 0, 0, 0]);
  });

  it("rejects the zero quaternion", () => {
    expect(() => normalize([0, 0, 0, 0])).toThrow();
  });

  it("composes rotations like matrix multiplication", () => {
    const a = axisAngle([0, 1, 0], Math.PI / 2);
    const b = axisAngle([0, 1, 0], Math.PI / 2);
    const ab = quatMultiply(a, b);
    const v = rotate(ab, [0, 0, 1]);
    expect(v[0]).toBeCloseTo(0, 12);
    expect(v[2]).toBeCloseTo(-1, 12);
  });

  it("identity forward is +z, right is +x", () => {
    expect(forwardAxis([1, 0, 0, 0])).toEqual([0, 0, 1]);
    expect(rightAxis([1, 0, 0, 0])).toEqual([1, 0, 0]);
  });

  it("yaw of 90 degrees turns forward toward image-right (+x at identity)", () => {
    const p = yaw(identityPose(), Math.PI / 2);
    const f = forwardAxis(p.quaternion);
    expect(f[0]).toBeCloseTo(1, 12);
    expect(f[2]).toBeCloseTo(0, 12);
  });
});

describe("pose updates", () => {
  it("forward translation moves along local forward only", () => {
    const p = translate(identityPose(), [0, 0, 0.4]);
    expect(p.translation).toEqual([0, 0, 0.4]);
  });

  it("translation respects orientation", () => {
    const turned = yaw(identityPose(), Math.PI / 2); // facing +x
    const p = translate(turned, [0, 0, 1]);
    expect(p.translation[0]).toBeCloseTo(1, 12);
    expect(p.translation[2]).toBeCloseTo(0, 12);
  });

  it("yaw +90 then -90 returns to start", () => {
    const start = identityPose();
    const back = yaw(yaw(start, Math.PI / 2), -Math.PI / 2);
    expect(poseApproxEqual(back, start, 1e-12)).toBe(true);
  });

  it("pitch +x then -x returns to start", () => {
    const start = identityPose();
    const back = pitch(pitch(start, 0.3), -0.3);
    expect(poseApproxEqual(back, start, 1e-12)).toBe(true);
  });

  it("wire format matches the service schema", () => {
    const wire = poseToWire(identityPose());
    expect(wire).toEqual({ quaternion: [1, 0, 0, 0], translation: [0, 0, 0] });
  });

  it("wire quaternions are normalized before send", () => {
    const wire = poseToWire({ quaternion: [2, 0, 0, 0], translation: [1, 2, 3] });
    expect(wire.quaternion).toEqual([1, 0, 0, 0]);
  });
});
