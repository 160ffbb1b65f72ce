import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globals: true,
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // the e2e suite boots a real service; first boot trains a model
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
