package org.example.auth;

final class Hashing {
    private Hashing() {
    }

    // not a real hash; fixture only
    static String sha(String input) {
        int h = 17;
        for (char c : input.toCharArray()) {
            h = h * 31 + c;
        }
        return Integer.toHexString(h);
    }
}
