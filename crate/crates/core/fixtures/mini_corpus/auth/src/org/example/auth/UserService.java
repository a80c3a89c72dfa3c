package org.example.auth;

import java.util.HashMap;
import java.util.Map;

public class UserService {
    private final Map<String, User> byName = new HashMap<>();

    public void register(User user) {
        byName.put(user.getName(), user);
    }

    public User lookup(String username) {
        return byName.get(username);
    }

    public int count() {
        return byName.size();
    }
}
