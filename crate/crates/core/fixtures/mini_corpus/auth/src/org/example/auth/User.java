package org.example.auth;

public class User {
    private final String name;
    private final String passwordHash;
    private boolean admin;

    public User(String name, String passwordHash) {
        this.name = name;
        this.passwordHash = passwordHash;
    }

    public String getName() {
        return name;
    }

    public boolean checkPassword(String password) {
        return Hashing.sha(password).equals(passwordHash);
    }

    public boolean isAdmin() {
        return admin;
    }
}
